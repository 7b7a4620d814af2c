//! Parameter settings for both constructions.

use crate::error::{Error, Result};
use crate::fourier::{mass_bound, MassBoundMode};

/// Smallest `j ≥ 0` with `2^j ≥ x`, for exact integers.
fn ceil_log2_u128(x: u128) -> u32 {
    if x <= 1 {
        0
    } else {
        128 - (x - 1).leading_zeros()
    }
}

fn overflow(what: &str) -> Error {
    Error::invalid("parameters", format!("{what} overflows 128-bit arithmetic"))
}

/// `k = ⌈5 lg n + 2 lg w⌉`, `r = ⌈2 lg n + ½ lg w⌉`, computed as the least
/// integers with `2^k ≥ n⁵w²` and `2^(2r) ≥ n⁴w`.
pub fn derive_params_exact(n: usize, w: usize) -> Result<(usize, usize)> {
    if n < 2 || w < 1 {
        return Err(Error::invalid("parameters", format!("need n ≥ 2 and w ≥ 1, got n={n} w={w}")));
    }
    let (n, w) = (n as u128, w as u128);
    let pow = |b: u128, e: u32| b.checked_pow(e);
    let k_target = pow(n, 5)
        .and_then(|a| pow(w, 2).and_then(|b| a.checked_mul(b)))
        .ok_or_else(|| overflow("n⁵w²"))?;
    let r_target = pow(n, 4)
        .and_then(|a| a.checked_mul(w))
        .ok_or_else(|| overflow("n⁴w"))?;
    let k = ceil_log2_u128(k_target) as usize;
    let r = (ceil_log2_u128(r_target) as usize).div_ceil(2);
    Ok((k, r))
}

/// Least integer `j` with `2^j ≥ x` for positive finite `x`, checked against
/// exact powers of two so that `x = 2^j` is not rounded up.
pub(crate) fn ceil_lg(x: f64) -> i64 {
    let mut j = x.log2().ceil() as i64;
    while 2f64.powi((j - 1) as i32) >= x {
        j -= 1;
    }
    while 2f64.powi(j as i32) < x {
        j += 1;
    }
    j
}

/// Parameters of the small-bias variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StarParams {
    pub r: usize,
    pub k: usize,
    pub gamma: f64,
    pub delta: f64,
    /// `L(n, w; k)` used for δ.
    pub mass: f64,
}

/// `r = ⌈lg n⌉`, `k = ⌈3 lg(nw/ε)⌉`, `γ = (nw/ε)^(−9)`, `δ = (nw·L(n,w;k)/ε)^(−3)`.
pub fn derive_params_star(n: usize, w: usize, epsilon: f64, mode: MassBoundMode) -> Result<StarParams> {
    if n < 1 || w < 1 {
        return Err(Error::invalid("parameters", format!("need n ≥ 1 and w ≥ 1, got n={n} w={w}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("error target ε", format!("{epsilon} is not in (0, 1)")));
    }
    let r = ceil_log2_u128(n as u128) as usize;
    let ratio = n as f64 * w as f64 / epsilon;
    let k = ceil_lg(ratio.powi(3)).max(1) as usize;
    let gamma = ratio.powi(-9);
    let mass = mass_bound(n, w, k, mode);
    if mass.overflowed {
        return Err(Error::invalid(
            "mass bound",
            format!("L({n},{w};{k}) in {mode} mode overflows, which would force δ = 0"),
        ));
    }
    let delta = (ratio * mass.value).powi(-3);
    if delta <= 0.0 || gamma <= 0.0 {
        return Err(Error::invalid(
            "parameters",
            format!("δ = {delta:e} or γ = {gamma:e} underflows to zero"),
        ));
    }
    Ok(StarParams {
        r,
        k,
        gamma,
        delta,
        mass: mass.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_formulas() {
        assert_eq!(derive_params_exact(256, 256).unwrap(), (56, 20));
        assert_eq!(derive_params_exact(2, 1).unwrap(), (5, 2));
        assert_eq!(derive_params_exact(1024, 1024).unwrap(), (70, 25));
        // lg 3 ≈ 1.585: k = ⌈7.92 + 2⌉ = 10, r = ⌈3.17 + 0.5⌉ = 4
        assert_eq!(derive_params_exact(3, 2).unwrap(), (10, 4));
        assert!(derive_params_exact(1, 1).is_err());
    }

    #[test]
    fn exact_formulas_agree_with_floating_point_off_powers() {
        for n in 2..200usize {
            for w in 1..20usize {
                let (k, r) = derive_params_exact(n, w).unwrap();
                let (ln, lw) = ((n as f64).log2(), (w as f64).log2());
                let kf = 5.0 * ln + 2.0 * lw;
                let rf = 2.0 * ln + 0.5 * lw;
                // Away from integers the float formula is reliable.
                if (kf - kf.round()).abs() > 1e-9 {
                    assert_eq!(k, kf.ceil() as usize, "n={n} w={w}");
                }
                if (rf - rf.round()).abs() > 1e-9 {
                    assert_eq!(r, rf.ceil() as usize, "n={n} w={w}");
                }
            }
        }
    }

    #[test]
    fn star_formulas() {
        let p = derive_params_star(16, 2, 0.5, MassBoundMode::Trivial).unwrap();
        assert_eq!((p.r, p.k), (4, 18));
        assert_eq!(p.gamma, 64f64.powi(-9));
        let l: f64 = (1..=16).map(|i| (binomial(16, i) * 2.0).sqrt()).sum();
        assert!((p.mass - l).abs() <= 1e-9 * l);
        assert!((p.delta - (64.0 * l).powi(-3)).abs() <= 1e-12 * p.delta);

        let p = derive_params_star(2, 1, 0.5, MassBoundMode::Trivial).unwrap();
        assert_eq!((p.r, p.k), (1, 6));
        assert_eq!(p.gamma, 4f64.powi(-9));

        assert!(derive_params_star(4, 2, 1.0, MassBoundMode::Trivial).is_err());
        assert!(derive_params_star(1 << 20, 64, 0.1, MassBoundMode::Chrt(10.0)).is_err());
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn ceil_lg_exact_on_powers() {
        assert_eq!(ceil_lg(262144.0), 18);
        assert_eq!(ceil_lg(262145.0), 19);
        assert_eq!(ceil_lg(1.0), 0);
        assert_eq!(ceil_lg(0.75), 0);
        assert_eq!(ceil_lg(0.5), -1);
    }
}
