//! Shared helpers for integration tests.

#![allow(dead_code)]

use astro_float::{BigFloat, Consts, RoundingMode};
use monoreg::geometry::{DirectionSet, PixelGrid};

pub const PRECISION: usize = 512;
const RM: RoundingMode = RoundingMode::ToEven;

/// Result of an LDL* factorization of `A - tau I` in 512-bit arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct Certificate {
    pub definite: bool,
    /// Binary exponent of the smallest pivot (pivot ≈ 2^e), if any pivot was positive.
    pub min_pivot_exponent: Option<i32>,
}

/// Complex entries as (re, im) pairs, row-major `n x n`.
pub struct BigHermitian {
    pub n: usize,
    pub re: Vec<BigFloat>,
    pub im: Vec<BigFloat>,
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PRECISION)
}

/// Rational `num / den` at full precision.
fn ratio(num: i64, den: i64) -> BigFloat {
    BigFloat::from_i64(num, PRECISION).div(&BigFloat::from_i64(den, PRECISION), PRECISION, RM)
}

fn sinc(x: &BigFloat, cc: &mut Consts) -> BigFloat {
    if x.is_zero() {
        BigFloat::from_u32(1, PRECISION)
    } else {
        x.sin(PRECISION, RM, cc).div(x, PRECISION, RM)
    }
}

/// Sensitivity matrices for the given pixels, every quantity in 512-bit arithmetic.
///
/// `k` and the grid half width must be dyadic rationals so that they are
/// exact in double precision; pixel centers are then exact as well.
pub fn big_sensitivities(k: f64, grid: &PixelGrid, dirs: &DirectionSet, pixels: &[usize]) -> Vec<BigHermitian> {
    let mut cc = Consts::new().expect("constants cache");
    let n = dirs.len();
    let pi = cc.pi(PRECISION, RM);
    let kb = big(k);
    let side = grid.side as i64;
    // ell = 2 h / side
    let ell = big(2.0 * grid.half_width).div(&BigFloat::from_i64(side, PRECISION), PRECISION, RM);
    let (mut cs, mut sn) = (Vec::new(), Vec::new());
    for j in 0..n {
        let phi = pi.mul(&ratio(2 * j as i64, n as i64), PRECISION, RM);
        cs.push(phi.cos(PRECISION, RM, &mut cc));
        sn.push(phi.sin(PRECISION, RM, &mut cc));
    }
    // (2 pi / N) (k ell)^2 sinc(k ell d1 / 2) sinc(k ell d2 / 2)
    let kl = kb.mul(&ell, PRECISION, RM);
    let pref = pi
        .mul(&ratio(2, n as i64), PRECISION, RM)
        .mul(&kl, PRECISION, RM)
        .mul(&kl, PRECISION, RM);
    let half = kl.div(&BigFloat::from_u32(2, PRECISION), PRECISION, RM);
    let mut env = Vec::with_capacity(n * n);
    for l in 0..n {
        for j in 0..n {
            let d1 = cs[j].sub(&cs[l], PRECISION, RM).mul(&half, PRECISION, RM);
            let d2 = sn[j].sub(&sn[l], PRECISION, RM).mul(&half, PRECISION, RM);
            env.push(pref.mul(&sinc(&d1, &mut cc), PRECISION, RM).mul(&sinc(&d2, &mut cc), PRECISION, RM));
        }
    }
    pixels
        .iter()
        .map(|&m| {
            let (ix, iy) = ((m % grid.side) as i64, (m / grid.side) as i64);
            // z = -h + (i + 1/2) ell, exact for dyadic h
            let hw = big(grid.half_width);
            let zc = |i: i64| ell.mul(&ratio(2 * i + 1, 2), PRECISION, RM).sub(&hw, PRECISION, RM);
            let (zx, zy) = (zc(ix), zc(iy));
            // p_j = exp(i k z·theta_j)
            let (mut pr, mut pi_) = (Vec::new(), Vec::new());
            for j in 0..n {
                let t = kb.mul(
                    &zx.mul(&cs[j], PRECISION, RM).add(&zy.mul(&sn[j], PRECISION, RM), PRECISION, RM),
                    PRECISION,
                    RM,
                );
                pr.push(t.cos(PRECISION, RM, &mut cc));
                pi_.push(t.sin(PRECISION, RM, &mut cc));
            }
            let mut re = Vec::with_capacity(n * n);
            let mut im = Vec::with_capacity(n * n);
            for l in 0..n {
                for j in 0..n {
                    // p_j conj(p_l)
                    let a = pr[j].mul(&pr[l], PRECISION, RM).add(&pi_[j].mul(&pi_[l], PRECISION, RM), PRECISION, RM);
                    let b = pi_[j].mul(&pr[l], PRECISION, RM).sub(&pr[j].mul(&pi_[l], PRECISION, RM), PRECISION, RM);
                    let e = &env[l * n + j];
                    re.push(e.mul(&a, PRECISION, RM));
                    im.push(e.mul(&b, PRECISION, RM));
                }
            }
            BigHermitian { n, re, im }
        })
        .collect()
}

/// LDL* of the real symmetric embedding `[[Re, -Im], [Im, Re]] - tau I`,
/// `tau = 2^shift_exponent * max diagonal`.
///
/// All pivots positive proves `lambda_min(A) >= tau - (rounding)`, with the
/// rounding error far below `tau` at this precision.
pub fn certify_definite(a: &BigHermitian, shift_exponent: i32) -> Certificate {
    let n = a.n;
    let m = 2 * n;
    let mut s: Vec<BigFloat> = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            let (i, j) = (r % n, c % n);
            let v = match (r < n, c < n) {
                (true, true) | (false, false) => a.re[i * n + j].clone(),
                (true, false) => a.im[i * n + j].neg(),
                (false, true) => a.im[i * n + j].clone(),
            };
            s.push(v);
        }
    }
    let mut dmax = BigFloat::from_u32(0, PRECISION);
    for i in 0..m {
        if s[i * m + i].cmp(&dmax) == Some(1) {
            dmax = s[i * m + i].clone();
        }
    }
    let tau = dmax.mul(&big(2f64.powi(shift_exponent)), PRECISION, RM);
    for i in 0..m {
        s[i * m + i] = s[i * m + i].sub(&tau, PRECISION, RM);
    }
    let mut min_exp: Option<i32> = None;
    for k in 0..m {
        let p = s[k * m + k].clone();
        if !p.is_positive() || p.is_zero() {
            return Certificate {
                definite: false,
                min_pivot_exponent: min_exp,
            };
        }
        let e = p.exponent().expect("finite pivot");
        min_exp = Some(min_exp.map_or(e, |x| x.min(e)));
        for i in (k + 1)..m {
            let f = s[i * m + k].div(&p, PRECISION, RM);
            if f.is_zero() {
                continue;
            }
            for j in (k + 1)..=i {
                let u = f.mul(&s[j * m + k], PRECISION, RM);
                s[i * m + j] = s[i * m + j].sub(&u, PRECISION, RM);
            }
        }
    }
    Certificate {
        definite: true,
        min_pivot_exponent: min_exp,
    }
}

/// Pixel-center truth mask support helpers.
pub fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let either = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if either == 0 {
        1.0
    } else {
        both as f64 / either as f64
    }
}
