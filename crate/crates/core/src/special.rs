//! Bessel and Hankel functions of integer order, the outgoing 2D Helmholtz
//! Green's function, and `sinc`.
//!
//! For `|x| <= 20` the `J_n` sequence comes from Miller's backward recurrence
//! normalized by `J_0 + 2 sum J_2k = 1`, and `Y_0`, `Y_1` from their Neumann
//! series in the same `J_n`. Above that the Hankel asymptotic expansion is
//! used for orders 0 and 1. Higher-order `Y_n` use forward recurrence, which
//! is stable for the second kind.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ASYMPTOTIC_SPLIT: f64 = 20.0;
const TINY_ARGUMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// First kind.
    J,
    /// Second kind (Neumann).
    Y,
}

/// `J_nu(x)` or `Y_nu(x)` for `nu` in {0, 1}.
pub fn bessel(order: u32, kind: BesselKind, x: f64) -> Result<f64> {
    if order > 1 {
        return Err(Error::Domain(format!("bessel order {order} not supported (0 or 1)")));
    }
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel argument {x} is not finite")));
    }
    match kind {
        BesselKind::J => Ok(bessel_j_orders(order as usize, x)[order as usize]),
        BesselKind::Y => {
            if x <= 0.0 {
                return Err(Error::Domain(format!("Y_{order}({x}) requires x > 0")));
            }
            let (y0, y1) = y01(x);
            Ok(if order == 0 { y0 } else { y1 })
        }
    }
}

/// `J_0(x), ..., J_nmax(x)`.
pub fn bessel_j_orders(nmax: usize, x: f64) -> Vec<f64> {
    if x < 0.0 {
        let mut v = bessel_j_orders(nmax, -x);
        v.iter_mut().skip(1).step_by(2).for_each(|j| *j = -*j);
        return v;
    }
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return v;
    }
    if x > ASYMPTOTIC_SPLIT && nmax <= 1 {
        let (j0, j1, _, _) = asymptotic01(x);
        return [j0, j1][..=nmax].to_vec();
    }
    if x < TINY_ARGUMENT {
        // Leading terms only; the next correction is below 1e-16 relative.
        let half = 0.5 * x;
        let mut v = Vec::with_capacity(nmax + 1);
        let mut term = 1.0;
        for n in 0..=nmax {
            if n > 0 {
                term *= half / n as f64;
            }
            let correction = 1.0 - half * half / (n as f64 + 1.0);
            v.push(term * correction);
        }
        return v;
    }
    miller(nmax, x).0
}

/// Miller backward recurrence. Also returns the full unnormalized-length
/// sequence (normalized) up to the starting index, which the Neumann series
/// for `Y` needs.
fn miller(nmax: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let top = nmax.max(x.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut seq = vec![0.0; start + 2];
    seq[start] = 1e-30;
    for k in (1..=start).rev() {
        seq[k - 1] = 2.0 * k as f64 / x * seq[k] - seq[k + 1];
        if seq[k - 1].abs() > 1e200 {
            seq.iter_mut().for_each(|v| *v *= 1e-200);
        }
    }
    let norm = seq[0] + 2.0 * seq.iter().skip(2).step_by(2).sum::<f64>();
    seq.iter_mut().for_each(|v| *v /= norm);
    let head = seq[..=nmax].to_vec();
    (head, seq)
}

/// `(Y_0(x), Y_1(x))` for `x > 0`.
fn y01(x: f64) -> (f64, f64) {
    if x > ASYMPTOTIC_SPLIT {
        let (_, _, y0, y1) = asymptotic01(x);
        return (y0, y1);
    }
    let (_, j) = miller(1, x);
    neumann01(&j, x)
}

/// `Y_0`, `Y_1` from a normalized Miller sequence `J_0, J_1, ...`.
fn neumann01(j: &[f64], x: f64) -> (f64, f64) {
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = (log_term * j[0] - 2.0 * s0) / FRAC_PI_2;
    let y1 = (-j[0] / x + log_term * j[1] + s1) / FRAC_PI_2;
    (y0, y1)
}

/// Hankel expansion for `J_0, J_1, Y_0, Y_1` at large argument.
fn asymptotic01(x: f64) -> (f64, f64, f64, f64) {
    let pq = |nu: f64| {
        let mu = 4.0 * nu * nu;
        let mut p = 0.0;
        let mut q = 0.0;
        let mut term = 1.0;
        let mut last = f64::INFINITY;
        for k in 0..60 {
            if k > 0 {
                let odd = (2 * k - 1) as f64;
                term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
            }
            if term.abs() > last && k > 2 {
                break;
            }
            last = term.abs();
            match k % 4 {
                0 => p += term,
                1 => q += term,
                2 => p -= term,
                _ => q -= term,
            }
            if term.abs() < 1e-17 {
                break;
            }
        }
        (p, q)
    };
    let amp = (2.0 / (PI * x)).sqrt();
    let (p0, q0) = pq(0.0);
    let (p1, q1) = pq(1.0);
    let chi0 = x - FRAC_PI_4;
    let chi1 = x - 3.0 * FRAC_PI_4;
    let j0 = amp * (p0 * chi0.cos() - q0 * chi0.sin());
    let y0 = amp * (p0 * chi0.sin() + q0 * chi0.cos());
    let j1 = amp * (p1 * chi1.cos() - q1 * chi1.sin());
    let y1 = amp * (p1 * chi1.sin() + q1 * chi1.cos());
    (j0, j1, y0, y1)
}

/// `Y_0(x), ..., Y_nmax(x)` for `x > 0`.
pub fn bessel_y_orders(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Y_n({x}) requires finite x > 0")));
    }
    let (y0, y1) = y01(x);
    let mut v = vec![y0, y1];
    for n in 1..nmax {
        let next = 2.0 * n as f64 / x * v[n] - v[n - 1];
        v.push(next);
    }
    v.truncate(nmax + 1);
    Ok(v)
}

/// `H^(1)_n(x) = J_n(x) + i Y_n(x)` for `n = 0..=nmax`.
pub fn hankel1_orders(nmax: usize, x: f64) -> Result<Vec<Complex64>> {
    let y = bessel_y_orders(nmax, x)?;
    let j = bessel_j_orders(nmax, x);
    Ok(j.iter().zip(&y).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// First-kind Hankel function of order 0 or 1.
pub fn hankel1(order: u32, x: f64) -> Result<Complex64> {
    if order > 1 {
        return Err(Error::Domain(format!("hankel order {order} not supported (0 or 1)")));
    }
    if !(x > 0.0) {
        return Err(Error::Domain(format!("H^(1)_{order}({x}) requires x > 0")));
    }
    let j = bessel(order, BesselKind::J, x)?;
    let y = bessel(order, BesselKind::Y, x)?;
    Ok(Complex64::new(j, y))
}

/// `(H^(1)_0(x), H^(1)_1(x))` for `x > 0`, sharing one recurrence.
pub(crate) fn hankel01(x: f64) -> (Complex64, Complex64) {
    if x > ASYMPTOTIC_SPLIT {
        let (j0, j1, y0, y1) = asymptotic01(x);
        return (Complex64::new(j0, y0), Complex64::new(j1, y1));
    }
    let (_, seq) = miller(1, x);
    let (y0, y1) = neumann01(&seq, x);
    let (j0, j1) = if x < TINY_ARGUMENT {
        let v = bessel_j_orders(1, x);
        (v[0], v[1])
    } else {
        (seq[0], seq[1])
    };
    (Complex64::new(j0, y0), Complex64::new(j1, y1))
}

/// Outgoing fundamental solution of `Delta + k^2` in the plane,
/// `(i/4) H^(1)_0(k r)`.
pub fn green2d(k: f64, r: f64) -> Result<Complex64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    if r == 0.0 {
        return Err(Error::Domain("Green's function is singular at r = 0".into()));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {r}")));
    }
    Ok(Complex64::new(0.0, 0.25) * hankel1(0, k * r)?)
}

/// `sin(x) / x`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}
