//! Nonlinearities `f(r, s)` with derivatives, primitives and convexity data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Direction;
use crate::grid::Field;

/// Largest `|s|` accepted by the exponential kinds.
pub const EXP_SAFE: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Nonlinearity {
    /// `|s|^{p-1} s`
    LaneEmden { p: f64 },
    /// `r^alpha |s|^{p-1} s`
    Henon { p: f64, alpha: f64 },
    /// `lambda r^alpha e^s`
    Gelfand {
        lambda: f64,
        #[serde(default)]
        alpha: f64,
    },
    /// `eps r^alpha (e^s - e^{-s})`
    SinhPoisson {
        eps: f64,
        #[serde(default)]
        alpha: f64,
    },
}

// 16-point Gauss–Legendre rule on [0, 1].
const GL16: [(f64, f64); 8] = [
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
    (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
    (0.755_404_408_355_003, 0.124_628_971_255_533_9),
    (0.865_631_202_387_831_7, 0.095_158_511_682_492_78),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
];

fn gauss_legendre(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for &(x, w) in &GL16 {
        s += w * (g(m - h * x) + g(m + h * x));
    }
    0.5 * s
}

/// `sinh(d) / d`, accurate near zero.
fn sinhc(d: f64) -> f64 {
    if d.abs() < 1e-4 {
        1.0 + d * d / 6.0
    } else {
        d.sinh() / d
    }
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidNonlinearity(m));
        let alpha_ok = |a: f64| a.is_finite() && a >= 0.0;
        match *self {
            Nonlinearity::LaneEmden { p } if !(p > 1.0 && p.is_finite()) => bad(format!("p must exceed 1, got {p}")),
            Nonlinearity::Henon { p, .. } if !(p > 1.0 && p.is_finite()) => bad(format!("p must exceed 1, got {p}")),
            Nonlinearity::Henon { alpha, .. }
            | Nonlinearity::Gelfand { alpha, .. }
            | Nonlinearity::SinhPoisson { alpha, .. }
                if !alpha_ok(alpha) =>
            {
                bad(format!("alpha must be nonnegative, got {alpha}"))
            }
            Nonlinearity::Gelfand { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                bad(format!("lambda must be positive, got {lambda}"))
            }
            Nonlinearity::SinhPoisson { eps, .. } if !(eps > 0.0 && eps.is_finite()) => {
                bad(format!("eps must be positive, got {eps}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::LaneEmden { .. } => "LaneEmden",
            Nonlinearity::Henon { .. } => "Henon",
            Nonlinearity::Gelfand { .. } => "Gelfand",
            Nonlinearity::SinhPoisson { .. } => "SinhPoisson",
        }
    }

    /// Power-type kinds admit exact Nehari scaling.
    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Nonlinearity::LaneEmden { .. } | Nonlinearity::Henon { .. })
    }

    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Nonlinearity::LaneEmden { p } | Nonlinearity::Henon { p, .. } => Some(p),
            _ => None,
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            Nonlinearity::LaneEmden { .. } => 0.0,
            Nonlinearity::Henon { alpha, .. }
            | Nonlinearity::Gelfand { alpha, .. }
            | Nonlinearity::SinhPoisson { alpha, .. } => alpha,
        }
    }

    /// Radial weight `r^alpha`.
    #[inline]
    pub fn weight(&self, r: f64) -> f64 {
        let a = self.alpha();
        if a == 0.0 {
            1.0
        } else {
            r.powf(a)
        }
    }

    /// `f(r, .)` convex where it matters: always for Gelfand, on `s > 0` for
    /// the power kinds.
    pub fn f_convex(&self) -> bool {
        !matches!(self, Nonlinearity::SinhPoisson { .. })
    }

    pub fn fp_convex(&self) -> bool {
        match *self {
            Nonlinearity::LaneEmden { p } | Nonlinearity::Henon { p, .. } => p >= 2.0,
            Nonlinearity::Gelfand { .. } => false,
            Nonlinearity::SinhPoisson { .. } => true,
        }
    }

    fn check_exp(&self, s: f64) -> Result<()> {
        if matches!(self, Nonlinearity::Gelfand { .. } | Nonlinearity::SinhPoisson { .. })
            && (s.is_nan() || s.abs() > EXP_SAFE)
        {
            return Err(Error::Overflow(s.abs()));
        }
        Ok(())
    }

    pub fn eval_f(&self, r: f64, s: f64) -> Result<f64> {
        self.check_exp(s)?;
        Ok(self.weight(r) * self.f_unweighted(s))
    }

    pub fn eval_fp(&self, r: f64, s: f64) -> Result<f64> {
        self.check_exp(s)?;
        Ok(self.weight(r) * self.fp_unweighted(s))
    }

    /// `G(r, s) = ∫₀ˢ f(r, t) dt`.
    pub fn primitive(&self, r: f64, s: f64) -> Result<f64> {
        self.check_exp(s)?;
        let g = match *self {
            Nonlinearity::LaneEmden { p } | Nonlinearity::Henon { p, .. } => s.abs().powf(p + 1.0) / (p + 1.0),
            Nonlinearity::Gelfand { lambda, .. } => lambda * s.exp_m1(),
            Nonlinearity::SinhPoisson { eps, .. } => {
                let h = (0.5 * s).sinh();
                4.0 * eps * h * h
            }
        };
        Ok(self.weight(r) * g)
    }

    fn f_unweighted(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::LaneEmden { p } | Nonlinearity::Henon { p, .. } => s.abs().powf(p - 1.0) * s,
            Nonlinearity::Gelfand { lambda, .. } => lambda * s.exp(),
            Nonlinearity::SinhPoisson { eps, .. } => 2.0 * eps * s.sinh(),
        }
    }

    fn fp_unweighted(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::LaneEmden { p } | Nonlinearity::Henon { p, .. } => {
                if s == 0.0 {
                    0.0
                } else {
                    p * s.abs().powf(p - 1.0)
                }
            }
            Nonlinearity::Gelfand { lambda, .. } => lambda * s.exp(),
            Nonlinearity::SinhPoisson { eps, .. } => 2.0 * eps * s.cosh(),
        }
    }

    /// `∫₀¹ f'(r, t b + (1 - t) a) dt`, symmetric in `(a, b)` bit for bit.
    pub fn segment_mean_fp(&self, r: f64, a: f64, b: f64) -> Result<f64> {
        self.check_exp(a)?;
        self.check_exp(b)?;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if lo == hi {
            return Ok(self.weight(r) * self.fp_unweighted(lo));
        }
        let v = match *self {
            Nonlinearity::LaneEmden { .. } | Nonlinearity::Henon { .. } => {
                let scale = lo.abs().max(hi.abs());
                if lo < 0.0 && hi > 0.0 || hi - lo > 1e-3 * scale {
                    (self.f_unweighted(hi) - self.f_unweighted(lo)) / (hi - lo)
                } else {
                    gauss_legendre(lo, hi, |s| self.fp_unweighted(s))
                }
            }
            Nonlinearity::Gelfand { lambda, .. } => {
                let (m, d) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                lambda * m.exp() * sinhc(d)
            }
            Nonlinearity::SinhPoisson { eps, .. } => {
                let (m, d) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                2.0 * eps * m.cosh() * sinhc(d)
            }
        };
        Ok(self.weight(r) * v)
    }

    /// `f(r, s)` at every node.
    pub fn f_field(&self, u: &Field) -> Result<Field> {
        let g = u.grid().clone();
        let mut out = Field::zeros(&g);
        for (n, (o, &s)) in out.values_mut().iter_mut().zip(u.values()).enumerate() {
            *o = self.eval_f(g.radius(n / g.n_theta()), s)?;
        }
        Ok(out)
    }

    /// `f'(r, s)` at every node.
    pub fn fp_field(&self, u: &Field) -> Result<Field> {
        let g = u.grid().clone();
        let mut out = Field::zeros(&g);
        for (n, (o, &s)) in out.values_mut().iter_mut().zip(u.values()).enumerate() {
            *o = self.eval_fp(g.radius(n / g.n_theta()), s)?;
        }
        Ok(out)
    }

    /// `∫ G(|x|, u) dx` by grid quadrature.
    pub fn primitive_integral(&self, u: &Field) -> Result<f64> {
        let g = u.grid();
        let mut s = 0.0;
        for (n, &v) in u.values().iter().enumerate() {
            s += g.quad_w(n) * self.primitive(g.radius(n / g.n_theta()), v)?;
        }
        Ok(s)
    }
}

/// `(V_e, V_es)` for the reflection across the axis through `e`.
pub fn comparison_potentials(nl: &Nonlinearity, u: &Field, e: &Direction) -> Result<(Field, Field)> {
    let g = u.grid().clone();
    let m = e.lattice_index(g.n_theta())?;
    let v = u.values();
    let mut ve = Field::zeros(&g);
    let mut ves = Field::zeros(&g);
    for n in 0..g.len() {
        let r = g.radius(n / g.n_theta());
        let a = v[n];
        let b = v[crate::geometry::reflect_node_lattice(&g, m, n)];
        ve.values_mut()[n] = nl.segment_mean_fp(r, a, b)?;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        ves.values_mut()[n] = 0.5 * (nl.eval_fp(r, lo)? + nl.eval_fp(r, hi)?);
    }
    Ok((ve, ves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::grid::PolarGrid;
    use proptest::prelude::*;
    use std::sync::Arc;

    const LE3: Nonlinearity = Nonlinearity::LaneEmden { p: 3.0 };

    #[test]
    fn examples() {
        assert_eq!(LE3.eval_f(0.5, 2.0).unwrap(), 8.0);
        assert_eq!(LE3.eval_fp(0.5, 2.0).unwrap(), 12.0);
        let h = Nonlinearity::Henon { p: 3.0, alpha: 2.0 };
        assert_eq!(h.eval_f(0.0, 5.0).unwrap(), 0.0);
        let sp = Nonlinearity::SinhPoisson { eps: 1.0, alpha: 0.0 };
        assert_eq!(sp.eval_f(0.3, 0.0).unwrap(), 0.0);
        let gf = Nonlinearity::Gelfand { lambda: 0.1, alpha: 0.0 };
        assert_eq!(gf.eval_fp(0.3, 0.0).unwrap(), 0.1);
        assert!(matches!(gf.eval_f(0.3, 701.0), Err(Error::Overflow(_))));
        assert!(LE3.eval_f(0.3, 1e4).is_ok());
    }

    #[test]
    fn validation() {
        assert!(Nonlinearity::LaneEmden { p: 1.0 }.validate().is_err());
        assert!(Nonlinearity::Henon { p: 2.0, alpha: -1.0 }.validate().is_err());
        assert!(Nonlinearity::Gelfand { lambda: 0.0, alpha: 0.0 }.validate().is_err());
        assert!(Nonlinearity::SinhPoisson { eps: -1.0, alpha: 0.0 }.validate().is_err());
        assert!(LE3.validate().is_ok());
    }

    #[test]
    fn flags() {
        assert!(LE3.fp_convex() && LE3.f_convex());
        assert!(!Nonlinearity::LaneEmden { p: 1.5 }.fp_convex());
        assert!(Nonlinearity::Gelfand { lambda: 1.0, alpha: 0.0 }.f_convex());
        assert!(Nonlinearity::SinhPoisson { eps: 1.0, alpha: 0.0 }.fp_convex());
    }

    #[test]
    fn gelfand_segment_mean() {
        let lam = 0.7;
        let gf = Nonlinearity::Gelfand { lambda: lam, alpha: 0.0 };
        let e1 = std::f64::consts::E;
        let ve = gf.segment_mean_fp(0.4, 0.0, 1.0).unwrap();
        assert!((ve - lam * (e1 - 1.0)).abs() < 1e-15);
        let ves = 0.5 * (gf.eval_fp(0.4, 0.0).unwrap() + gf.eval_fp(0.4, 1.0).unwrap());
        assert!((ves - lam * (1.0 + e1) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_field_collapses_potentials() {
        let g = Arc::new(PolarGrid::new(DomainSpec::disk(1.0).unwrap(), 6, 16).unwrap());
        let u = Field::from_fn(&g, |r, t| (1.0 - r * r) * (1.0 + 0.5 * t.cos()));
        let u = u.map_nodes(|n, x| {
            let m = crate::geometry::reflect_node_lattice(&g, 0, n);
            0.5 * (x + u.values()[m])
        });
        let (ve, ves) = comparison_potentials(&LE3, &u, &Direction::new(0.0)).unwrap();
        let fp = LE3.fp_field(&u).unwrap();
        assert!(ve.sub(&fp).sup_norm() < 1e-12 * fp.sup_norm());
        assert!(ves.sub(&fp).sup_norm() < 1e-12 * fp.sup_norm());
    }

    #[test]
    fn potentials_are_reflection_invariant() {
        let g = Arc::new(PolarGrid::new(DomainSpec::annulus(0.5, 1.0).unwrap(), 5, 16).unwrap());
        let u = Field::from_fn(&g, |r, t| (3.0 * r).sin() * (t + 0.3).cos() + 0.2 * (2.0 * t).sin());
        for nl in [LE3, Nonlinearity::SinhPoisson { eps: 0.5, alpha: 1.0 }] {
            for m in [0usize, 3, 7] {
                let (ve, ves) = comparison_potentials(&nl, &u, &Direction::lattice(m as i64, 16)).unwrap();
                for n in 0..g.len() {
                    let s = crate::geometry::reflect_node_lattice(&g, m, n);
                    assert_eq!(ve.values()[n], ve.values()[s]);
                    assert_eq!(ves.values()[n], ves.values()[s]);
                }
            }
        }
    }

    fn kinds() -> impl Strategy<Value = Nonlinearity> {
        prop_oneof![
            (1.1f64..6.0).prop_map(|p| Nonlinearity::LaneEmden { p }),
            (1.1f64..6.0, 0.0f64..4.0).prop_map(|(p, alpha)| Nonlinearity::Henon { p, alpha }),
            (0.01f64..2.0, 0.0f64..2.0).prop_map(|(lambda, alpha)| Nonlinearity::Gelfand { lambda, alpha }),
            (0.01f64..2.0, 0.0f64..2.0).prop_map(|(eps, alpha)| Nonlinearity::SinhPoisson { eps, alpha }),
        ]
    }

    proptest! {
        #[test]
        fn fp_matches_central_difference(nl in kinds(), r in 0.05f64..1.5, s in -4.0f64..4.0) {
            prop_assume!(s.abs() > 0.05);
            let h = 1e-5;
            let fd = (nl.eval_f(r, s + h).unwrap() - nl.eval_f(r, s - h).unwrap()) / (2.0 * h);
            let fp = nl.eval_fp(r, s).unwrap();
            prop_assert!((fd - fp).abs() <= 1e-6 * fp.abs().max(1e-3), "{} vs {}", fd, fp);
        }

        #[test]
        fn primitive_derivative_is_f(nl in kinds(), r in 0.05f64..1.5, s in -3.0f64..3.0) {
            let h = 1e-5;
            let fd = (nl.primitive(r, s + h).unwrap() - nl.primitive(r, s - h).unwrap()) / (2.0 * h);
            let f = nl.eval_f(r, s).unwrap();
            prop_assert!((fd - f).abs() <= 1e-6 * f.abs().max(1e-2));
        }

        #[test]
        fn odd_kinds_are_odd(p in 1.1f64..6.0, r in 0.05f64..1.5, s in -5.0f64..5.0) {
            for nl in [Nonlinearity::LaneEmden { p }, Nonlinearity::Henon { p, alpha: 1.0 }, Nonlinearity::SinhPoisson { eps: p, alpha: 0.5 }] {
                prop_assert_eq!(nl.eval_f(r, -s).unwrap(), -nl.eval_f(r, s).unwrap());
            }
        }

        #[test]
        fn segment_mean_matches_quadrature(nl in kinds(), r in 0.05f64..1.5, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let exact = (nl.eval_f(r, b).unwrap() - nl.eval_f(r, a).unwrap()) / (b - a);
            let ve = nl.segment_mean_fp(r, a, b).unwrap();
            prop_assert!((ve - exact).abs() <= 1e-9 * exact.abs().max(1.0));
        }

        #[test]
        fn hermite_hadamard_for_convex_fp(p in 2.0f64..6.0, r in 0.05f64..1.5, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            for nl in [Nonlinearity::LaneEmden { p }, Nonlinearity::SinhPoisson { eps: 0.5, alpha: 0.0 }] {
                let ve = nl.segment_mean_fp(r, a, b).unwrap();
                let ves = 0.5 * (nl.eval_fp(r, a).unwrap() + nl.eval_fp(r, b).unwrap());
                prop_assert!(ve <= ves + 1e-12);
            }
        }

        #[test]
        fn convexity_tangent_inequality(r in 0.05f64..1.5, a in 0.0f64..3.0, b in 0.0f64..3.0, p in 1.1f64..6.0) {
            for nl in [Nonlinearity::LaneEmden { p }, Nonlinearity::Gelfand { lambda: 0.3, alpha: 1.0 }] {
                let lhs = nl.eval_f(r, b).unwrap() - nl.eval_f(r, a).unwrap();
                let rhs = nl.eval_fp(r, a).unwrap() * (b - a);
                prop_assert!(lhs >= rhs - 1e-12 * (1.0 + lhs.abs()));
            }
        }
    }
}
