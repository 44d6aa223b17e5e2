//! Matrix exponential by scaling and squaring with diagonal Padé approximants.
//!
//! Degree selection and the θ_m thresholds follow Higham (2005), "The Scaling
//! and Squaring Method for the Matrix Exponential Revisited". The matrices in
//! this crate are tiny (4×4 and 16×16) so everything is stack-allocated.

use nalgebra::{Const, SMatrix};
use num_complex::Complex64;

const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_230e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1<const D: usize>(a: &SMatrix<Complex64, D, D>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled<const D: usize>(a: &SMatrix<Complex64, D, D>, k: f64) -> SMatrix<Complex64, D, D> {
    a.map(|z| z * k)
}

fn add_identity<const D: usize>(a: &mut SMatrix<Complex64, D, D>, k: f64) {
    for i in 0..D {
        a[(i, i)] += Complex64::new(k, 0.0);
    }
}

/// Odd/even Padé polynomials `(U, V)` for degree 3, 5, 7 or 9.
fn pade_low<const D: usize>(
    a: &SMatrix<Complex64, D, D>,
    b: &[f64],
) -> (SMatrix<Complex64, D, D>, SMatrix<Complex64, D, D>) {
    let a2 = a * a;
    let mut u = SMatrix::<Complex64, D, D>::zeros();
    let mut v = SMatrix::<Complex64, D, D>::zeros();
    add_identity(&mut u, b[1]);
    add_identity(&mut v, b[0]);
    let mut power = a2;
    let m = b.len() - 1;
    let mut k = 2;
    while k <= m {
        u += scaled(&power, b[k + 1]);
        v += scaled(&power, b[k]);
        if k + 2 <= m {
            power = power * a2;
        }
        k += 2;
    }
    (a * u, v)
}

fn pade13<const D: usize>(
    a: &SMatrix<Complex64, D, D>,
) -> (SMatrix<Complex64, D, D>, SMatrix<Complex64, D, D>) {
    let b = &B13;
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;

    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let mut u = a6 * inner_u + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]);
    add_identity(&mut u, b[1]);
    let u = a * u;

    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let mut v = a6 * inner_v + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]);
    add_identity(&mut v, b[0]);
    (u, v)
}

/// `exp(A)` for a small square complex matrix.
///
/// Returns `None` if the Padé denominator is singular or the result is not
/// finite (overflow for very large norms).
pub fn expm<const D: usize>(a: &SMatrix<Complex64, D, D>) -> Option<SMatrix<Complex64, D, D>>
where
    Const<D>: nalgebra::DimMin<Const<D>, Output = Const<D>>,
{
    let norm = norm1(a);
    if !norm.is_finite() {
        return None;
    }

    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(a, &B3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(a, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(a, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(a, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let a_s = scaled(a, 2f64.powi(-s));
        let (u, v) = pade13(&a_s);
        (u, v, s)
    };

    let p = v + u;
    let q = v - u;
    let mut r = q.lu().solve(&p)?;
    for _ in 0..squarings {
        r = r * r;
    }
    r.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(r)
}
