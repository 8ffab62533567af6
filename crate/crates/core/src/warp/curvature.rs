use serde::Serialize;

use super::{WarpKind, WarpProfile};
use crate::{Error, Result};

/// Below this `t` the axis quotients `s''/s` and `c'/s` use their Taylor limits.
const AXIS_TAYLOR: f64 = 1e-8;

/// Sectional curvatures of the coordinate planes and the diagonal Ricci
/// values at one `t`.
///
/// Tube kind: planes `(t, phi)`, `(t, U)`, `(phi, U)`, `(U, V)` with `U, V`
/// tangent to `R^{n-2}`; `K_UV` is absent for `n = 3`. Channel and cusp kinds
/// have a single warp, so only `(t, U)` and `(U, V)` exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionalReport {
    pub t: f64,
    pub n: usize,
    pub kind: WarpKind,
    pub k_t_phi: Option<f64>,
    pub k_t_u: f64,
    pub k_phi_u: Option<f64>,
    pub k_u_v: Option<f64>,
    pub ric_t: f64,
    pub ric_phi: Option<f64>,
    pub ric_u: f64,
}

impl SectionalReport {
    /// All defined sectional curvatures, in the order
    /// `K_t_phi, K_t_U, K_phi_U, K_U_V`.
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        [self.k_t_phi, Some(self.k_t_u), self.k_phi_u, self.k_u_v]
            .into_iter()
            .flatten()
    }

    pub fn min(&self) -> f64 {
        self.defined().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.defined().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sectional curvature of the plane spanned by `u, w`, given by their
    /// orthonormal frame components. The frame diagonalizes the curvature
    /// operator, so `R(u,w,w,u) = sum_{i<j} K_ij (u_i w_j - u_j w_i)^2`.
    pub fn sectional_of(&self, u: &[f64], w: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut area = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let b = u[i] * w[j] - u[j] * w[i];
                num += self.plane(i, j) * b * b;
                area += b * b;
            }
        }
        num / area
    }

    /// Sectional curvature of the plane spanned by orthonormal frame vectors
    /// `e_i, e_j` (`i != j`). Frame order: `t`, then `phi` (tube kind only),
    /// then the flat directions.
    pub fn plane(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(a != b && b < self.n);
        match self.kind {
            WarpKind::Tube => match (a, b) {
                (0, 1) => self.k_t_phi.unwrap_or(self.k_t_u),
                (0, _) => self.k_t_u,
                (1, _) => self.k_phi_u.unwrap_or(self.k_t_u),
                _ => self.k_u_v.unwrap_or(0.0),
            },
            WarpKind::Channel | WarpKind::Cusp => {
                if a == 0 {
                    self.k_t_u
                } else {
                    self.k_u_v.unwrap_or(0.0)
                }
            }
        }
    }
}

pub fn sectional_curvatures(w: &WarpProfile, t: f64, n: usize) -> Result<SectionalReport> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 3, got {n}")));
    }
    let v = w.values(t)?;
    let nf = n as f64;
    let k_t_u = -v.d2c / v.c;
    let k_u_v_raw = -(v.dc * v.dc) / (v.c * v.c);

    let report = match w.kind {
        WarpKind::Tube => {
            let near_axis = match w.axis_third_derivative() {
                Some(d3) if t.abs() < AXIS_TAYLOR => Some(d3),
                _ => None,
            };
            let (k_t_phi, k_phi_u) = match near_axis {
                Some(d3) => (-d3 / (v.ds + d3 * t * t / 6.0), -v.d2c / v.c),
                None => (-v.d2s / v.s, -(v.ds * v.dc) / (v.s * v.c)),
            };
            let k_u_v = (n >= 4).then_some(k_u_v_raw);
            SectionalReport {
                t,
                n,
                kind: w.kind,
                k_t_phi: Some(k_t_phi),
                k_t_u,
                k_phi_u: Some(k_phi_u),
                k_u_v,
                ric_t: k_t_phi + (nf - 2.0) * k_t_u,
                ric_phi: Some(k_t_phi + (nf - 2.0) * k_phi_u),
                ric_u: k_t_u + k_phi_u + k_u_v.map_or(0.0, |k| (nf - 3.0) * k),
            }
        }
        WarpKind::Channel | WarpKind::Cusp => SectionalReport {
            t,
            n,
            kind: w.kind,
            k_t_phi: None,
            k_t_u,
            k_phi_u: None,
            k_u_v: Some(k_u_v_raw),
            ric_t: (nf - 1.0) * k_t_u,
            ric_phi: None,
            ric_u: k_t_u + (nf - 2.0) * k_u_v_raw,
        },
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{channel_profile, tube_profile, CutoffProfile};

    #[test]
    fn hyperbolic_three_space() {
        let w = WarpProfile::hyperbolic(20.0);
        let r = sectional_curvatures(&w, 1.0, 3).unwrap();
        assert!((r.k_t_phi.unwrap() + 1.0).abs() < 1e-12);
        assert!((r.k_phi_u.unwrap() + 1.0).abs() < 1e-12);
        assert!((r.k_t_u + 1.0).abs() < 1e-12);
        assert!(r.k_u_v.is_none());
    }

    #[test]
    fn hyperbolic_n4_k_uv_is_minus_tanh_squared() {
        let w = WarpProfile::hyperbolic(20.0);
        let r = sectional_curvatures(&w, 1.0, 4).unwrap();
        let expected = -(1f64.tanh().powi(2));
        assert!((r.k_u_v.unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn euclidean_cylinder_is_flat() {
        let w = WarpProfile::euclidean(10.0);
        for t in [0.0, 1e-10, 0.3, 2.0, 7.5] {
            let r = sectional_curvatures(&w, t, 5).unwrap();
            for k in r.defined() {
                assert_eq!(k, 0.0, "t={t}");
            }
        }
    }

    #[test]
    fn exponential_is_minus_one() {
        let w = WarpProfile::exponential(20.0);
        let r = sectional_curvatures(&w, 2.0, 5).unwrap();
        for k in r.defined() {
            assert_eq!(k, -1.0);
        }
        assert_eq!(r.defined().count(), 4);
    }

    #[test]
    fn axis_limits() {
        let w = tube_profile(&CutoffProfile::new(5.0, 0.1).unwrap());
        let r = sectional_curvatures(&w, 0.0, 4).unwrap();
        assert_eq!(r.k_t_phi, Some(-1.0));
        assert_eq!(r.k_phi_u, Some(-1.0));
        assert_eq!(r.k_t_u, -1.0);
        assert_eq!(r.k_u_v.unwrap(), 0.0);
        assert_eq!(r.max(), 0.0);
        let tiny = sectional_curvatures(&w, 1e-9, 4).unwrap();
        assert!((tiny.k_t_phi.unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn channel_waist() {
        let cut = CutoffProfile::new(5.0, 0.1).unwrap();
        let w = channel_profile(&cut, 0.2).unwrap();
        let r = sectional_curvatures(&w, 0.0, 4).unwrap();
        assert_eq!(r.k_t_u, -1.0);
        assert_eq!(r.k_u_v, Some(0.0));
        assert!(r.k_t_phi.is_none() && r.k_phi_u.is_none());
    }

    #[test]
    fn ricci_is_sum_of_planes() {
        let cut = CutoffProfile::new(5.0, 0.1).unwrap();
        for n in 3..=6 {
            for w in [tube_profile(&cut), channel_profile(&cut, 1.0).unwrap()] {
                for i in 0..50 {
                    let t = 0.01 + 0.15 * i as f64;
                    let r = sectional_curvatures(&w, t, n).unwrap();
                    let sum = |a: usize| -> f64 {
                        (0..n).filter(|&b| b != a).map(|b| r.plane(a, b)).sum()
                    };
                    assert!((r.ric_t - sum(0)).abs() < 1e-12);
                    let last = n - 1;
                    assert!((r.ric_u - sum(last)).abs() < 1e-12);
                    if let Some(rp) = r.ric_phi {
                        assert!((rp - sum(1)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_low_dimension() {
        assert!(sectional_curvatures(&WarpProfile::hyperbolic(1.0), 0.5, 2).is_err());
    }
}
