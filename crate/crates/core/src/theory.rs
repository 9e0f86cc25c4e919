//! Convergence constants, stepsize bounds and the 2×2 rate certificates for
//! the deterministic (`A`, `B`) and stochastic (`C`) trigger analyses.
//!
//! All bounds are sufficient conditions; they are typically far more
//! conservative than the stepsizes that work in practice.

use std::fmt::Write as _;

use crate::compressors::CompressorConstants;
use crate::error::{Error, Result};
use crate::triggers::StochasticTriggerParams;

pub type Mat2 = [[f64; 2]; 2];

/// `L_F = η·L_m + ‖I − W‖_F`
pub fn lipschitz_lf(eta: f64, l_m: f64, fro_i_minus_w: f64) -> f64 {
    eta * l_m + fro_i_minus_w
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monotonicity {
    pub mu_f: f64,
    pub beta: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Strong monotonicity modulus of the augmented mapping.
pub fn monotone_mu_f(eta: f64, mu_r: f64, n: usize, l_m: f64, lambda_min_tilde: f64) -> Result<Monotonicity> {
    if !(eta > 0.0 && mu_r > 0.0 && l_m > 0.0 && n > 0) {
        return Err(Error::InvalidParameter(format!(
            "need eta, mu_r, L_m > 0 and n >= 1; got eta={eta}, mu_r={mu_r}, L_m={l_m}, n={n}"
        )));
    }
    let n = n as f64;
    let beta = -1.0 + (1.0 + mu_r / (2.0 * n * eta * l_m)).sqrt();
    let b1 = eta * mu_r / (2.0 * n);
    let b2 = beta * beta * lambda_min_tilde / (beta * beta + 1.0) - eta * eta * l_m;
    if !(b2 > 0.0) {
        return Err(Error::Inadmissible(format!("b2 = {b2} <= 0 at eta = {eta}")));
    }
    Ok(Monotonicity {
        mu_f: b1.min(b2),
        beta,
        b1,
        b2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtcConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_x: f64,
    pub gamma: f64,
    pub a: Mat2,
    pub b: [f64; 2],
    /// `(1 − A11, 1 − A22)` formed without cancellation.
    pub diag_gap: [f64; 2],
}

/// Constants of the component-wise recursion
/// `V_{k+1} ≤ A·V_k + B·‖E_k‖²` with `V = (‖X − X*‖², ‖X − H‖²)`.
#[allow(clippy::too_many_arguments)]
pub fn etc_constants(
    alpha: f64,
    r: f64,
    delta: f64,
    c_comp: f64,
    fro_i_minus_w: f64,
    l_f: f64,
    mu_f: f64,
    gamma: f64,
) -> Result<EtcConstants> {
    let ard = alpha * r * delta;
    if !(alpha > 0.0) || alpha > (1.0 / r) * (1.0 + 1e-12) {
        return Err(Error::Inadmissible(format!("alpha = {alpha} outside (0, 1/r = {}]", 1.0 / r)));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Inadmissible(format!("delta = {delta} outside (0, 1]")));
    }
    if !(mu_f > 0.0 && mu_f < l_f) {
        return Err(Error::Inadmissible(format!("need 0 < mu_F < L_F, got mu_F={mu_f}, L_F={l_f}")));
    }
    let (l2, m2) = (l_f * l_f, mu_f * mu_f);
    let fro2 = fro_i_minus_w * fro_i_minus_w;
    let c1 = (2.0 * l2 - m2) / (2.0 * l2 - 2.0 * m2);
    let c2 = 2.0 * c1 * fro2 * c_comp / (c1 - 1.0);
    let c3 = (4.0 - 2.0 * ard) / ard;
    let c4 = 2.0 * c3 * c_comp * fro2;
    let c_x = (2.0 - ard) / 2.0;
    let g2 = gamma * gamma;
    let diag_gap = [
        c1 * gamma * (2.0 * mu_f - l2 * gamma) - m2 / (2.0 * l2 - 2.0 * m2),
        ard / 2.0 - c4 * g2,
    ];
    let a = [
        [c1 * (1.0 + l2 * g2 - 2.0 * mu_f * gamma), c2 * g2],
        [c3 * g2 * l2, c_x + c4 * g2],
    ];
    Ok(EtcConstants {
        c1,
        c2,
        c3,
        c4,
        c_x,
        gamma,
        a,
        b: [c2 * g2, c4 * g2],
        diag_gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetcConstants {
    /// `ln κ − ln a`
    pub l: f64,
    pub c5: f64,
    pub c6: f64,
    pub cmat: Mat2,
    /// `(1 − C11, 1 − C22)`
    pub diag_gap: [f64; 2],
}

/// Folds the stochastic gate's event-error bound into the recursion:
/// `V_{k+1} ≤ C·V_k`.
pub fn setc_constants(etc: &EtcConstants, trigger: &StochasticTriggerParams) -> SetcConstants {
    let l = trigger.log_span();
    let factor = l * l + 1.0;
    let (c5, c6) = (etc.c2 * factor, etc.c4 * factor);
    let g2 = etc.gamma * etc.gamma;
    SetcConstants {
        l,
        c5,
        c6,
        cmat: [[etc.a[0][0], c5 * g2], [etc.a[1][0], etc.c_x + c6 * g2]],
        diag_gap: [etc.diag_gap[0], etc.diag_gap[1] + (etc.c4 - c6) * g2],
    }
}

/// `4·c_a·c3/F⁴ + 1/(4F²) + c_b/F⁴` with `F = ‖I − W‖_F`; `(c_a, c_b)` is
/// `(c2, c4)` for the deterministic bound and `(c5, c6)` for the stochastic.
pub fn m_constant(c_a: f64, c_b: f64, c3: f64, fro_i_minus_w: f64) -> f64 {
    let f2 = fro_i_minus_w * fro_i_minus_w;
    let f4 = f2 * f2;
    4.0 * c_a * c3 / f4 + 1.0 / (4.0 * f2) + c_b / f4
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaBound {
    pub value: f64,
    pub terms: [f64; 3],
}

/// `min{ (2n/μ_r)·√((1 − c_x)/m), √(λ̃/(2L_m)), μ_r/(6n·L_m) }`
pub fn eta_bound(n: usize, mu_r: f64, l_m: f64, lambda_min_tilde: f64, m: f64, c_x: f64) -> Result<EtaBound> {
    if !(c_x < 1.0) {
        return Err(Error::Inadmissible(format!("c_x = {c_x} >= 1, alpha too small")));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
    }
    let n = n as f64;
    let terms = [
        (2.0 * n / mu_r) * ((1.0 - c_x) / m).sqrt(),
        (lambda_min_tilde / (2.0 * l_m)).sqrt(),
        mu_r / (6.0 * n * l_m),
    ];
    Ok(EtaBound {
        value: terms.iter().copied().fold(f64::INFINITY, f64::min),
        terms,
    })
}

/// Largest absolute eigenvalue of a real 2×2 matrix.
pub fn spectral_radius_2x2(m: &Mat2) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        det.sqrt()
    }
}

/// `1 − ρ(M)` for a matrix with nonnegative entries, given `1 − M11`,
/// `1 − M22` and the off-diagonal entries. Stays accurate when `ρ(M)` is
/// within rounding of 1, where [`spectral_radius_2x2`] cannot resolve the gap.
pub fn spectral_gap_2x2(diag_gap: [f64; 2], m12: f64, m21: f64) -> f64 {
    let [g1, g2] = diag_gap;
    let root = ((g1 - g2) * (g1 - g2) + 4.0 * m12 * m21).sqrt();
    let sum = g1 + g2;
    if sum > 0.0 {
        2.0 * (g1 * g2 - m12 * m21) / (sum + root)
    } else {
        (sum - root) / 2.0
    }
}

/// Which trigger analysis a certificate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    Deterministic,
    Stochastic,
}

/// Problem data the constants depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryInputs {
    pub n: usize,
    pub mu_r: f64,
    pub l_m: f64,
    pub fro_i_minus_w: f64,
    pub lambda_min_tilde: f64,
    pub compressor: CompressorConstants,
    pub alpha: f64,
    pub stochastic: Option<StochasticTriggerParams>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryConstants {
    pub eta: f64,
    pub l_f: f64,
    pub mono: Monotonicity,
    pub gamma_star: f64,
    pub etc: EtcConstants,
    pub setc: Option<SetcConstants>,
    pub m1: f64,
    pub m2: Option<f64>,
    pub eta_max1: EtaBound,
    pub eta_max2: Option<EtaBound>,
    pub rho_a: f64,
    pub rho_c: Option<f64>,
    /// `1 − ρ(A)` and `1 − ρ(C)`, resolved below the rounding level of `ρ`.
    pub gap_a: f64,
    pub gap_c: Option<f64>,
}

impl TheoryConstants {
    /// Whether `eta` satisfies the bound of the given analysis.
    pub fn certifies(&self, which: Certificate) -> bool {
        match which {
            Certificate::Deterministic => self.eta <= self.eta_max1.value,
            Certificate::Stochastic => self.eta_max2.is_some_and(|b| self.eta <= b.value),
        }
    }

    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: f64| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("eta", self.eta);
        kv("L_F", self.l_f);
        kv("beta", self.mono.beta);
        kv("b1", self.mono.b1);
        kv("b2", self.mono.b2);
        kv("mu_F", self.mono.mu_f);
        kv("gamma_star", self.gamma_star);
        kv("c1", self.etc.c1);
        kv("c2", self.etc.c2);
        kv("c3", self.etc.c3);
        kv("c4", self.etc.c4);
        kv("c_x", self.etc.c_x);
        kv("A11", self.etc.a[0][0]);
        kv("A12", self.etc.a[0][1]);
        kv("A21", self.etc.a[1][0]);
        kv("A22", self.etc.a[1][1]);
        kv("B1", self.etc.b[0]);
        kv("B2", self.etc.b[1]);
        kv("m1", self.m1);
        kv("eta_max_deterministic", self.eta_max1.value);
        kv("rho_A", self.rho_a);
        kv("one_minus_rho_A", self.gap_a);
        if let (Some(st), Some(m2), Some(b2), Some(rc)) = (self.setc, self.m2, self.eta_max2, self.rho_c) {
            kv("l", st.l);
            kv("c5", st.c5);
            kv("c6", st.c6);
            kv("C11", st.cmat[0][0]);
            kv("C12", st.cmat[0][1]);
            kv("C21", st.cmat[1][0]);
            kv("C22", st.cmat[1][1]);
            kv("m2", m2);
            kv("eta_max_stochastic", b2.value);
            kv("rho_C", rc);
            kv("one_minus_rho_C", self.gap_c.unwrap_or(f64::NAN));
        }
        s
    }
}

/// Every constant at gradient stepsize `eta`, with `γ = μ_F/L_F²`.
pub fn analyze(inputs: &TheoryInputs, eta: f64) -> Result<TheoryConstants> {
    let TheoryInputs {
        n,
        mu_r,
        l_m,
        fro_i_minus_w: fro,
        lambda_min_tilde,
        compressor,
        alpha,
        stochastic,
    } = *inputs;
    let l_f = lipschitz_lf(eta, l_m, fro);
    let mono = monotone_mu_f(eta, mu_r, n, l_m, lambda_min_tilde)?;
    let gamma_star = mono.mu_f / (l_f * l_f);
    let etc = etc_constants(
        alpha,
        compressor.r,
        compressor.delta,
        compressor.c,
        fro,
        l_f,
        mono.mu_f,
        gamma_star,
    )?;
    let m1 = m_constant(etc.c2, etc.c4, etc.c3, fro);
    let eta_max1 = eta_bound(n, mu_r, l_m, lambda_min_tilde, m1, etc.c_x)?;
    let setc = stochastic.map(|p| setc_constants(&etc, &p));
    let m2 = setc.map(|s| m_constant(s.c5, s.c6, etc.c3, fro));
    let eta_max2 = m2
        .map(|m| eta_bound(n, mu_r, l_m, lambda_min_tilde, m, etc.c_x))
        .transpose()?;
    Ok(TheoryConstants {
        eta,
        l_f,
        mono,
        gamma_star,
        etc,
        setc,
        m1,
        m2,
        eta_max1,
        eta_max2,
        rho_a: spectral_radius_2x2(&etc.a),
        rho_c: setc.map(|s| spectral_radius_2x2(&s.cmat)),
        gap_a: spectral_gap_2x2(etc.diag_gap, etc.a[0][1], etc.a[1][0]),
        gap_c: setc.map(|s| spectral_gap_2x2(s.diag_gap, s.cmat[0][1], s.cmat[1][0])),
    })
}

/// Largest `η` (to bisection accuracy) satisfying the chosen bound.
///
/// The first term of the bound depends on `η` through `μ_F` and `L_F`, so the
/// bound is implicit in `η`. The search starts from the two `η`-free terms,
/// halves until the bound holds, then bisects towards the boundary.
pub fn certified_eta(inputs: &TheoryInputs, which: Certificate) -> Result<f64> {
    if which == Certificate::Stochastic && inputs.stochastic.is_none() {
        return Err(Error::InvalidParameter("stochastic certificate needs trigger parameters".into()));
    }
    let ok = |eta: f64| analyze(inputs, eta).is_ok_and(|t| t.certifies(which));
    let n = inputs.n as f64;
    let cap = (inputs.lambda_min_tilde / (2.0 * inputs.l_m))
        .sqrt()
        .min(inputs.mu_r / (6.0 * n * inputs.l_m));
    if ok(cap) {
        return Ok(cap);
    }
    let mut hi = cap;
    let mut lo = None;
    for _ in 0..200 {
        let eta = hi / 2.0;
        if ok(eta) {
            lo = Some(eta);
            break;
        }
        hi = eta;
    }
    let Some(mut lo) = lo else {
        return Err(Error::Inadmissible(format!(
            "no gradient stepsize satisfies the {which:?} bound (compressor C = {}, alpha = {})",
            inputs.compressor.c, inputs.alpha
        )));
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifiedStepsizes {
    pub eta: f64,
    pub gamma: f64,
    pub constants: TheoryConstants,
}

/// `η` from [`certified_eta`] and `γ = μ_F/L_F²` at that `η`.
pub fn certified_stepsizes(inputs: &TheoryInputs, which: Certificate) -> Result<CertifiedStepsizes> {
    let eta = certified_eta(inputs, which)?;
    let constants = analyze(inputs, eta)?;
    Ok(CertifiedStepsizes {
        eta,
        gamma: constants.gamma_star,
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressors::Compressor;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn lf_examples() {
        close(lipschitz_lf(0.01, 5.0, 6f64.sqrt()), 2.4995, 1e-4);
        assert_eq!(lipschitz_lf(0.0, 5.0, 2.0), 2.0);
        assert_eq!(lipschitz_lf(0.3, 0.0, 2.0), 2.0);
    }

    #[test]
    fn mu_f_examples() {
        // μ_r/(2nηL_m) = 8
        let m = monotone_mu_f(0.125, 8.0, 2, 2.0, 1.0).unwrap();
        close(m.beta, 2.0, 1e-14);

        let m = monotone_mu_f(0.01, 2.0, 2, 5f64.sqrt(), 1.0).unwrap();
        let beta = -1.0 + (1.0 + 2.0 / (0.04 * 5f64.sqrt())).sqrt();
        close(m.beta, beta, 1e-14);
        close(m.beta, 3.8333, 1e-4);
        close(m.b1, 0.005, 1e-15);
        close(m.b2, beta * beta / (beta * beta + 1.0) - 1e-4 * 5f64.sqrt(), 1e-14);
        close(m.b2, 0.9358, 1e-3);
        close(m.mu_f, 0.005, 1e-15);

        assert!(matches!(monotone_mu_f(100.0, 2.0, 2, 5.0, 1.0), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn etc_examples() {
        let e = etc_constants(0.05, 1.0, 0.5, 0.5, 1.0, 2.0, 0.5, 0.1).unwrap();
        close(e.c_x, 0.9875, 1e-15);
        close(e.c3, 158.0, 1e-10);
        close(e.c1, 7.75 / 7.5, 1e-14);
        let id = etc_constants(0.05, 1.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.1).unwrap();
        assert_eq!(id.c2, 0.0);
        assert_eq!(id.c4, 0.0);
        assert_eq!(id.a[0][1], 0.0);
        assert_eq!(id.b, [0.0, 0.0]);
        assert!(etc_constants(0.05, 1.0, 0.5, 0.5, 1.0, 1.0, 1.0, 0.1).is_err());
        assert!(etc_constants(0.6, 2.0, 0.5, 1.0, 1.0, 2.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn setc_examples() {
        let e = etc_constants(0.05, 1.0, 0.5, 0.5, 1.0, 2.0, 0.5, 0.1).unwrap();
        let p = StochasticTriggerParams::new(1.5, 0.5).unwrap();
        let s = setc_constants(&e, &p);
        close(s.l, 3f64.ln(), 1e-15);
        close(s.l * s.l + 1.0, 2.2069, 1e-4);
        close(s.c5, e.c2 * (s.l * s.l + 1.0), 1e-12);
        assert_eq!(s.cmat[0][0], e.a[0][0]);
        assert_eq!(s.cmat[1][0], e.a[1][0]);

        let near = StochasticTriggerParams::new(1.0 + 1e-12, 1.0 - 1e-12).unwrap();
        let s = setc_constants(&e, &near);
        close(s.c5, e.c2, 1e-9);
        for (row_c, row_a) in s.cmat.iter().zip(&e.a) {
            for (c, a) in row_c.iter().zip(row_a) {
                close(*c, *a, 1e-9);
            }
        }

        let id = etc_constants(0.05, 1.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.1).unwrap();
        assert_eq!(setc_constants(&id, &p).c5, 0.0);
    }

    #[test]
    fn eta_bound_examples() {
        let b = eta_bound(2, 2.0, 5f64.sqrt(), 100.0, 1e-9, 0.5).unwrap();
        close(b.terms[2], 2.0 / (12.0 * 5f64.sqrt()), 1e-15);
        close(b.terms[2], 0.0745, 1e-4);
        let b = eta_bound(2, 2.0, 5.0, 1.5, 1.0, 0.5).unwrap();
        close(b.terms[1], 0.15f64.sqrt(), 1e-15);
        close(b.terms[1], 0.3873, 1e-4);
        let b = eta_bound(2, 2.0, 5.0, 1.5, 1e300, 0.5).unwrap();
        assert!(b.value < 1e-140);
        assert!(matches!(eta_bound(2, 2.0, 5.0, 1.5, 1.0, 1.0), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn spectral_radius_examples() {
        close(spectral_radius_2x2(&[[0.5, 0.1], [0.2, 0.4]]), 0.6, 1e-15);
        assert_eq!(spectral_radius_2x2(&[[1.0, 0.0], [0.0, 1.0]]), 1.0);
        assert_eq!(spectral_radius_2x2(&[[0.0, 0.0], [0.0, 0.0]]), 0.0);
        // rotation-like: complex pair of modulus 1
        close(spectral_radius_2x2(&[[0.0, -1.0], [1.0, 0.0]]), 1.0, 1e-15);
    }

    #[test]
    fn spectral_gap_resolves_radius_near_one() {
        close(spectral_gap_2x2([0.5, 0.6], 0.1, 0.2), 0.4, 1e-15);
        // diag 1 − 1e-16, off-diagonal product 1e-18: gap is about 1e-16 − 1e-18
        let g = spectral_gap_2x2([1e-16, 1.0], 1e-9, 1e-9);
        close(g / 1e-16, 0.99, 1e-9);
    }

    #[test]
    fn diag_gaps_match_entries() {
        let e = etc_constants(0.5, 1.2, 0.8, 0.2, 1.5, 3.0, 0.4, 0.4 / 9.0).unwrap();
        close(e.diag_gap[0], 1.0 - e.a[0][0], 1e-14);
        close(e.diag_gap[1], 1.0 - e.a[1][1], 1e-14);
        let s = setc_constants(&e, &StochasticTriggerParams::new(1.5, 0.5).unwrap());
        close(s.diag_gap[1], 1.0 - s.cmat[1][1], 1e-14);
    }

    fn inputs(compressor: Compressor, d: usize, alpha: f64) -> TheoryInputs {
        TheoryInputs {
            n: 3,
            mu_r: 1.0,
            l_m: 3.0,
            fro_i_minus_w: 1.8,
            lambda_min_tilde: 0.6,
            compressor: compressor.constants(d),
            alpha,
            stochastic: Some(StochasticTriggerParams::new(1.5, 0.5).unwrap()),
        }
    }

    #[test]
    fn certified_stepsizes_are_contractive() {
        for (c, alpha) in [(Compressor::Identity, 1.0), (Compressor::Quantize { bits: 12 }, 0.5)] {
            let inp = inputs(c, 6, alpha);
            for which in [Certificate::Deterministic, Certificate::Stochastic] {
                let s = certified_stepsizes(&inp, which).unwrap();
                assert!(s.constants.certifies(which));
                assert!(s.constants.rho_a < 1.0);
                assert!(s.constants.rho_c.unwrap() < 1.0);
                assert!(s.constants.gap_a > 0.0 && s.constants.gap_c.unwrap() > 0.0);
                let mu = s.constants.mono.mu_f;
                let lf = s.constants.l_f;
                close(s.constants.etc.a[0][0], 1.0 - mu * mu / (2.0 * lf * lf), 1e-12);
            }
        }
    }

    #[test]
    fn coarse_compressor_has_no_certificate() {
        let inp = inputs(Compressor::Quantize { bits: 2 }, 100, 0.05);
        assert!(matches!(
            certified_eta(&inp, Certificate::Deterministic),
            Err(Error::Inadmissible(_))
        ));
    }

    #[test]
    fn report_lists_constants() {
        let inp = inputs(Compressor::Identity, 6, 1.0);
        let s = certified_stepsizes(&inp, Certificate::Stochastic).unwrap();
        let r = s.constants.to_report();
        for key in ["L_F=", "mu_F=", "gamma_star=", "rho_A=", "rho_C=", "eta_max_stochastic=", "m2="] {
            assert!(r.contains(key), "missing {key}");
        }
    }

    proptest! {
        #[test]
        fn spectral_radius_matches_eigen(a in 0.0f64..2.0, b in 0.0f64..2.0, c in 0.0f64..2.0, d in 0.0f64..2.0) {
            let m = nalgebra::Matrix2::new(a, b, c, d);
            let want = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!((spectral_radius_2x2(&[[a, b], [c, d]]) - want).abs() < 1e-9);
            prop_assert!((spectral_gap_2x2([1.0 - a, 1.0 - d], b, c) - (1.0 - want)).abs() < 1e-9);
        }

        #[test]
        fn admissible_eta_gives_rho_below_one(frac in 0.05f64..0.999, alpha in 0.05f64..1.0, bits in 8u32..16) {
            let inp = inputs(Compressor::Quantize { bits }, 6, alpha / (1.0 + Compressor::Quantize { bits }.constants(6).c));
            let Ok(eta) = certified_eta(&inp, Certificate::Stochastic) else { return Ok(()); };
            let t = analyze(&inp, eta * frac).unwrap();
            if t.certifies(Certificate::Stochastic) {
                prop_assert!(t.rho_c.unwrap() < 1.0);
            }
            if t.certifies(Certificate::Deterministic) {
                prop_assert!(t.rho_a < 1.0);
            }
        }
    }
}
