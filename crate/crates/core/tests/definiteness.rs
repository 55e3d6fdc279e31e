//! The 512-bit definiteness certificate used by the acceptance suite.

mod support;

use astro_float::BigFloat;
use monoreg::born::sensitivity_stack;
use monoreg::geometry::{directions, PixelGrid};
use support::{big_sensitivities, certify_definite, BigHermitian, PRECISION};

fn from_f64(n: usize, re: &[f64], im: &[f64]) -> BigHermitian {
    BigHermitian {
        n,
        re: re.iter().map(|&x| BigFloat::from_f64(x, PRECISION)).collect(),
        im: im.iter().map(|&x| BigFloat::from_f64(x, PRECISION)).collect(),
    }
}

#[test]
fn certificate_separates_definite_from_indefinite() {
    // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
    let pd = from_f64(2, &[2.0, 0.0, 0.0, 2.0], &[0.0, 1.0, -1.0, 0.0]);
    assert!(certify_definite(&pd, -100).definite);
    // [[1, 2i], [-2i, 1]] has eigenvalues -1 and 3.
    let indef = from_f64(2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 2.0, -2.0, 0.0]);
    assert!(!certify_definite(&indef, -100).definite);
    // Eigenvalue 2^-200 relative: definite, but not with a shift of 2^-100.
    let tiny = 2f64.powi(-200);
    let near = from_f64(2, &[1.0, 0.0, 0.0, tiny], &[0.0; 4]);
    assert!(certify_definite(&near, -300).definite);
    assert!(!certify_definite(&near, -100).definite);
}

#[test]
fn big_entries_match_double_precision() {
    let grid = PixelGrid::new(5.0, 16).unwrap();
    let dirs = directions(8).unwrap();
    let stack = sensitivity_stack(1.0, &grid, &dirs).unwrap();
    let pixels = [0, 77, 255];
    let bigs = big_sensitivities(1.0, &grid, &dirs, &pixels);
    let tol = BigFloat::from_f64(1e-15, PRECISION);
    let rm = astro_float::RoundingMode::ToEven;
    for (b, &m) in bigs.iter().zip(&pixels) {
        let s = stack.get(m).matrix();
        for l in 0..8 {
            for j in 0..8 {
                let z = s[(l, j)];
                let dr = BigFloat::from_f64(z.re, PRECISION).sub(&b.re[l * 8 + j], PRECISION, rm).abs();
                let di = BigFloat::from_f64(z.im, PRECISION).sub(&b.im[l * 8 + j], PRECISION, rm).abs();
                assert_eq!(dr.cmp(&tol), Some(-1), "pixel {m} ({l}, {j}) real part");
                assert_eq!(di.cmp(&tol), Some(-1), "pixel {m} ({l}, {j}) imaginary part");
            }
        }
    }
}
