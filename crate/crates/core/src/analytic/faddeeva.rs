//! Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` for the upper half plane.
//!
//! Near the origin we use Weideman's rational expansion (N = 32 terms); far
//! from it the Laplace continued fraction converges quickly and keeps full
//! relative accuracy in the Lorentzian wings, where the rational form only
//! holds absolute accuracy.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

const N_TERMS: usize = 32;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
/// Beyond this |z| the continued fraction takes over.
const CF_RADIUS: f64 = 8.0;
const CF_DEPTH: usize = 48;

struct Weideman {
    l: f64,
    /// Polynomial coefficients, lowest degree first.
    coeffs: [f64; N_TERMS],
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = N_TERMS as f64;
        let m = 2 * N_TERMS;
        let l = (n / 2f64.sqrt()).sqrt();
        // Sampled exp(-t^2)(L^2 + t^2) on t = L tan(theta/2), then a cosine
        // transform gives the expansion coefficients.
        let samples: Vec<(f64, f64)> = (-(m as i64) + 1..m as i64)
            .map(|k| {
                let theta = k as f64 * PI / m as f64;
                let t = l * (theta / 2.0).tan();
                (k as f64, (-t * t).exp() * (l * l + t * t))
            })
            .collect();
        let mut coeffs = [0.0; N_TERMS];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let s: f64 = samples.iter().map(|&(k, f)| f * (PI * (j as f64 + 1.0) * k / m as f64).cos()).sum();
            *c = s / (2 * m) as f64;
        }
        Weideman { l, coeffs }
    })
}

fn rational(z: Complex64) -> Complex64 {
    let tab = weideman();
    let i = Complex64::i();
    let lz = Complex64::new(tab.l, 0.0) - i * z;
    let big_z = (Complex64::new(tab.l, 0.0) + i * z) / lz;
    let p = tab.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * big_z + c);
    2.0 * p / (lz * lz) + FRAC_1_SQRT_PI / lz
}

fn continued_fraction(z: Complex64) -> Complex64 {
    // w(z) = (i/sqrt(pi)) / (z - (1/2)/(z - 1/(z - (3/2)/(z - ...))))
    let mut tail = z;
    for k in (1..=CF_DEPTH).rev() {
        tail = z - (k as f64 / 2.0) / tail;
    }
    Complex64::new(0.0, FRAC_1_SQRT_PI) / tail
}

/// Faddeeva function. Valid on the whole plane; the lower half plane is
/// reached through `w(z) = 2 exp(-z^2) - w(-z)`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        return 2.0 * (-z * z).exp() - faddeeva(-z);
    }
    if z.norm() > CF_RADIUS {
        continued_fraction(z)
    } else {
        rational(z)
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        2.0 * (x * x).exp() - erfcx(-x)
    } else if x < 4.0 {
        // exp(x^2) carries at most ~16 ulp of relative error here
        (x * x).exp() * libm::erfc(x)
    } else {
        faddeeva(Complex64::new(0.0, x)).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.special.wofz (double precision).
    const WOFZ: &[(f64, f64, f64, f64)] = &[
        (0.0, 0.0, 1.0, 0.0),
        (1.0, 0.5, 0.35490033286757783, 0.3428717191311008),
        (0.1, 0.001, 0.988944841841795, 0.11189087688601074),
        (5.0, 0.01, 0.0002408033919511768, 0.11524544620269582),
        (30.0, 0.5, 0.0003138749836928479, 0.01881154486772567),
        (3.0, 3.0, 0.09640250558304467, 0.0912363260042189),
        (-2.0, 0.2, 0.05953129731381417, -0.3213324097355767),
        (100.0, 0.0001, 5.6427423314924155e-09, 0.005642177972588493),
        (0.5, 10.0, 0.05600435223166482, 0.00277295478096162),
        (6.1, 1.7, 0.024770207982108137, 0.08659367476827697),
    ];

    #[test]
    fn matches_reference_table() {
        for &(x, y, re, im) in WOFZ {
            let w = faddeeva(Complex64::new(x, y));
            let scale = re.abs().max(im.abs());
            assert!(
                (w.re - re).abs() <= 1e-9 * re.abs().max(1e-300) + 1e-13 * scale,
                "re at ({x},{y}): {} vs {re}",
                w.re
            );
            assert!((w.im - im).abs() <= 1e-9 * im.abs() + 1e-13 * scale, "im at ({x},{y}): {} vs {im}", w.im);
        }
    }

    #[test]
    fn erfcx_reference() {
        for &(x, v) in &[
            (0.0, 1.0),
            (0.5, 0.6156903441929258),
            (2.0, 0.2553956763105058),
            (10.0, 0.05614099274382259),
            (30.0, 0.018795888861416754),
        ] {
            assert!((erfcx(x) - v).abs() < 1e-11 * v, "erfcx({x})");
        }
        for x in [3.999, 4.0, 4.001] {
            let w = faddeeva(Complex64::new(0.0, x)).re;
            assert!((erfcx(x) - w).abs() < 1e-14 * w, "erfcx({x})");
        }
        let x: f64 = -1.3;
        let direct = (x * x).exp() * libm::erfc(x);
        assert!((erfcx(x) - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn continuous_across_switch_radius() {
        for k in 0..16 {
            let phi = k as f64 * PI / 16.0;
            let z = Complex64::from_polar(CF_RADIUS, phi);
            let a = rational(z);
            let b = continued_fraction(z);
            assert!((a - b).norm() < 1e-10 * b.norm(), "phi={phi}: {a} vs {b}");
        }
    }
}
