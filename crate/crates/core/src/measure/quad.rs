//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const ABS_TOL: f64 = 1e-14;
const REL_TOL: f64 = 1e-12;
const MAX_DEPTH: u32 = 40;

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, err: f64, tol: f64, depth: u32) -> f64 {
    if err <= tol || depth >= MAX_DEPTH || b - a <= f64::EPSILON * a.abs().max(1.0) {
        return whole;
    }
    let mid = 0.5 * (a + b);
    let (left, el) = kronrod(f, a, mid);
    let (right, er) = kronrod(f, mid, b);
    adapt(f, a, mid, left, el, 0.5 * tol, depth + 1) + adapt(f, mid, b, right, er, 0.5 * tol, depth + 1)
}

/// ∫ₐᵇ f over a finite interval.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (whole, err) = kronrod(f, a, b);
    let tol = ABS_TOL.max(REL_TOL * whole.abs());
    adapt(f, a, b, whole, err, tol, 0)
}

/// ∫ₐ^∞ f, via the substitution x = a + s/(1−s).
pub fn integrate_to_infinity(f: &dyn Fn(f64) -> f64, a: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let x = a + s / one_minus;
        let v = f(x) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(&g, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        assert!((integrate(&|x| x * x, 0.0, 3.0) - 9.0).abs() < 1e-12);
        assert!((integrate_to_infinity(&|x: f64| (-x).exp(), 0.0) - 1.0).abs() < 1e-12);
        assert!((integrate_to_infinity(&|x: f64| 1.0 / (1.0 + x).powi(2), 0.0) - 1.0).abs() < 1e-10);
        let lognormal_like = integrate_to_infinity(&|x: f64| (-(x.ln().powi(2)) / 2.0).exp() / (x * (2.0 * std::f64::consts::PI).sqrt()), 0.0);
        assert!((lognormal_like - 1.0).abs() < 1e-10, "{lognormal_like}");
    }
}
