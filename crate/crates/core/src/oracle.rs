//! Independent curvature path: the Riemann tensor of a coordinate metric by
//! central finite differences of its Christoffel symbols, and the Jacobi
//! operator `R(., v)v` assembled from either that tensor or the closed-form
//! plane curvatures of a warp profile.
//!
//! Index convention: `R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`,
//! `R_ijkl = <R(d_i, d_j) d_k, d_l>`, so `K(d_i, d_j) = R_ijji / |d_i ^ d_j|^2`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::warp::{channel_profile, sectional_curvatures, tube_profile, CutoffProfile, WarpKind, WarpProfile};
use crate::{Error, Result};

/// Default finite-difference step for the oracle.
pub const FD_STEP: f64 = 1e-4;
/// Default clamp for slightly positive Jacobi eigenvalues.
pub const CLAMP_TOL: f64 = 1e-7;

/// A Riemannian metric given in coordinates.
pub trait MetricField {
    fn dim(&self) -> usize;
    fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>>;

    /// Rejects points too close to a coordinate singularity for step `h`.
    fn check_stencil(&self, _x: &[f64], _h: f64) -> Result<()> {
        Ok(())
    }
}

/// `dt^2 + s(t)^2 dphi^2 + c(t)^2 dsigma^2` (tube kind) or
/// `dt^2 + c(t)^2 dsigma^2` (channel and cusp kinds), in coordinates
/// `x = (t, phi, sigma_1, ...)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoordinateMetric {
    pub n: usize,
    pub profile: WarpProfile,
}

impl CoordinateMetric {
    pub fn new(profile: WarpProfile, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 3, got {n}")));
        }
        Ok(Self { n, profile })
    }

    pub fn diagonal(&self, t: f64) -> Result<Vec<f64>> {
        let v = self.profile.values(t)?;
        let mut d = vec![v.c * v.c; self.n];
        d[0] = 1.0;
        if self.profile.kind == WarpKind::Tube {
            d[1] = v.s * v.s;
        }
        Ok(d)
    }
}

impl MetricField for CoordinateMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&self.diagonal(x[0])?.into()))
    }

    fn check_stencil(&self, x: &[f64], h: f64) -> Result<()> {
        let axis = self.profile.kind == WarpKind::Tube
            && self.profile.axis_third_derivative().is_some();
        if axis && x[0] < 2.0 * h {
            return Err(Error::StepTooLarge { h, t: x[0] });
        }
        Ok(())
    }
}

/// Fully covariant curvature tensor `R_ijkl`.
#[derive(Debug, Clone)]
pub struct RiemannTensor {
    pub n: usize,
    data: Vec<f64>,
}

impl RiemannTensor {
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    /// `R(u, w, w, u)` contracted with vector components in coordinates.
    pub fn quadrilinear(&self, u: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += self.get(i, j, k, l) * u[i] * w[j] * w[k] * u[l];
                    }
                }
            }
        }
        acc
    }

    /// Sectional curvature of `span(u, w)` under metric `g`.
    pub fn sectional(&self, g: &DMatrix<f64>, u: &[f64], w: &[f64]) -> f64 {
        let ip = |a: &[f64], b: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..self.n {
                for j in 0..self.n {
                    s += g[(i, j)] * a[i] * b[j];
                }
            }
            s
        };
        let area2 = ip(u, u) * ip(w, w) - ip(u, w).powi(2);
        self.quadrilinear(u, w) / area2
    }

    /// Largest violation of `R_ijkl = -R_jikl = -R_ijlk = R_klij`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        worst = worst
                            .max((r + self.get(j, i, k, l)).abs())
                            .max((r + self.get(i, j, l, k)).abs())
                            .max((r - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of the first Bianchi identity.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.get(i, j, k, l) + self.get(j, k, i, l) + self.get(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

fn shifted(x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += delta;
    y
}

/// Christoffel symbols `Gamma^k_ij` at `x`, stored as `[k][i][j]`.
fn christoffel<M: MetricField + ?Sized>(m: &M, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = m.dim();
    let g = m.metric_at(x)?;
    let ginv = g.try_inverse().ok_or(Error::SingularMetric)?;
    // dg[a][b][c] = d_a g_bc
    let mut dg = vec![0.0; n * n * n];
    for a in 0..n {
        let gp = m.metric_at(&shifted(x, a, h))?;
        let gm = m.metric_at(&shifted(x, a, -h))?;
        for b in 0..n {
            for c in 0..n {
                dg[(a * n + b) * n + c] = (gp[(b, c)] - gm[(b, c)]) / (2.0 * h);
            }
        }
    }
    let d = |a: usize, b: usize, c: usize| dg[(a * n + b) * n + c];
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let gi = ginv[(k, l)];
                    if gi != 0.0 {
                        s += gi * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                    }
                }
                gamma[(k * n + i) * n + j] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// Riemann tensor at `x` by central differences of the Christoffel symbols,
/// which are themselves central differences of the metric. Oracle use only.
pub fn riemann_fd<M: MetricField + ?Sized>(m: &M, x: &[f64], h: f64) -> Result<RiemannTensor> {
    let n = m.dim();
    if x.len() != n {
        return Err(Error::InvalidArgument(format!(
            "point has {} coordinates, metric has dimension {n}",
            x.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    m.check_stencil(x, h)?;
    let gamma = christoffel(m, x, h)?;
    let gam = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    // dgam[a][k][i][j] = d_a Gamma^k_ij
    let mut dgam = vec![0.0; n * n * n * n];
    for a in 0..n {
        let gp = christoffel(m, &shifted(x, a, h), h)?;
        let gm = christoffel(m, &shifted(x, a, -h), h)?;
        for q in 0..n * n * n {
            dgam[a * n * n * n + q] = (gp[q] - gm[q]) / (2.0 * h);
        }
    }
    let dg = |a: usize, k: usize, i: usize, j: usize| dgam[((a * n + k) * n + i) * n + j];

    let g = m.metric_at(x)?;
    let mut upper = vec![0.0; n * n * n * n]; // R^l_ijk at [l][i][j][k]
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut r = dg(i, l, j, k) - dg(j, l, i, k);
                    for p in 0..n {
                        r += gam(l, i, p) * gam(p, j, k) - gam(l, j, p) * gam(p, i, k);
                    }
                    upper[((l * n + i) * n + j) * n + k] = r;
                }
            }
        }
    }
    let mut data = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for p in 0..n {
                        s += g[(l, p)] * upper[((p * n + i) * n + j) * n + k];
                    }
                    data[((i * n + j) * n + k) * n + l] = s;
                }
            }
        }
    }
    Ok(RiemannTensor { n, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum JacobiPath {
    ClosedForm,
    FiniteDifference { h: f64 },
}

/// `R(., v)v` in the orthonormal frame `d_i / |d_i|`, symmetrized, with its
/// eigenvalues sorted ascending.
#[derive(Debug, Clone, Serialize)]
pub struct JacobiOperator {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub path: JacobiPath,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl JacobiOperator {
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }
}

pub fn jacobi_operator(
    m: &CoordinateMetric,
    x: &[f64],
    v: &[f64],
    path: JacobiPath,
) -> Result<JacobiOperator> {
    let n = m.n;
    if x.len() != n || v.len() != n {
        return Err(Error::InvalidArgument("point/vector dimension mismatch".into()));
    }
    let diag = m.diagonal(x[0])?;
    let norm2: f64 = diag.iter().zip(v).map(|(g, vi)| g * vi * vi).sum();
    if (norm2 - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitVector { norm2 });
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    match path {
        JacobiPath::ClosedForm => {
            let rep = sectional_curvatures(&m.profile, x[0], n)?;
            let vo: Vec<f64> = diag.iter().zip(v).map(|(g, vi)| g.sqrt() * vi).collect();
            for i in 0..n {
                for k in 0..n {
                    if i == k {
                        j[(i, i)] = (0..n).filter(|&b| b != i).map(|b| rep.plane(i, b) * vo[b] * vo[b]).sum();
                    } else {
                        j[(i, k)] = -rep.plane(i, k) * vo[i] * vo[k];
                    }
                }
            }
        }
        JacobiPath::FiniteDifference { h } => {
            let r = riemann_fd(m, x, h)?;
            for i in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s += r.get(i, a, b, k) * v[a] * v[b];
                        }
                    }
                    j[(i, k)] = s / (diag[i] * diag[k]).sqrt();
                }
            }
        }
    }
    let sym = (&j + j.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    Ok(JacobiOperator { x: x.to_vec(), v: v.to_vec(), path, matrix: j, eigenvalues })
}

/// `tr sqrt(-R(., v)v)`; eigenvalues in `(0, clamp_tol]` count as zero.
pub fn tr_sqrt_neg(j: &JacobiOperator, clamp_tol: f64) -> Result<f64> {
    tr_sqrt_neg_eigen(&j.eigenvalues, clamp_tol)
}

pub fn tr_sqrt_neg_eigen(eigenvalues: &[f64], clamp_tol: f64) -> Result<f64> {
    let mut acc = 0.0;
    for &lambda in eigenvalues {
        if lambda > clamp_tol {
            return Err(Error::PositiveCurvature { eigenvalue: lambda, tol: clamp_tol });
        }
        acc += (-lambda).max(0.0).sqrt();
    }
    Ok(acc)
}

/// Unit vector in coordinates from orthonormal-frame components.
pub fn unit_from_frame(m: &CoordinateMetric, t: f64, frame: &[f64]) -> Result<Vec<f64>> {
    let diag = m.diagonal(t)?;
    let norm = frame.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("zero direction".into()));
    }
    Ok(frame.iter().zip(&diag).map(|(a, g)| a / norm / g.sqrt()).collect())
}

/// One closed-form versus finite-difference comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSample {
    pub profile: String,
    pub n: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub closed_form: f64,
    pub finite_difference: f64,
    pub abs_error: f64,
    pub symmetry_defect: f64,
}

/// A profile with its name and the `t` range sampled on it.
pub type NamedProfile = (String, WarpProfile, (f64, f64));

/// Closest approach to the polar axis in [`oracle_equivalence`]. The
/// difference error in polar coordinates grows like `(h / t)^2`; near the
/// axis the closed form is covered by its Taylor limits instead.
pub const AXIS_CLEARANCE: f64 = 0.25;

/// Profiles exercised by [`oracle_equivalence`]: `sinh/cosh`, the cutoff
/// tube and a channel built from the same cutoff, with the `t` range used.
pub fn oracle_profiles(cut: &CutoffProfile) -> Result<Vec<NamedProfile>> {
    let reach = cut.r_eps + 2.0;
    Ok(vec![
        ("hyperbolic".into(), WarpProfile::hyperbolic(reach), (AXIS_CLEARANCE, reach)),
        ("tube".into(), tube_profile(cut), (AXIS_CLEARANCE, reach)),
        ("channel".into(), channel_profile(cut, 0.5)?, (-reach, reach)),
    ])
}

/// Random `(profile, n, t, plane)` samples comparing the closed-form
/// sectional curvature with the finite-difference tensor. Points within
/// `4h` of `t = 1` and `t = r_eps`, where the cutoff is only `C^2`, are
/// skipped because nested central differences straddle the jump in the
/// third derivative.
pub fn oracle_equivalence(cut: &CutoffProfile, samples: usize, seed: u64, h: f64) -> Result<Vec<OracleSample>> {
    let profiles = oracle_profiles(cut)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples {
        let (name, profile, (lo, hi)) = &profiles[out.len() % profiles.len()];
        let n = rng.random_range(3..=5usize);
        let t: f64 = rng.random_range(*lo..*hi);
        if [1.0, cut.r_eps].iter().any(|k| (t.abs() - k).abs() < 4.0 * h) {
            continue;
        }
        let m = CoordinateMetric::new(*profile, n)?;
        let diag = m.diagonal(t)?;
        let uf: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let wf: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let u: Vec<f64> = uf.iter().zip(&diag).map(|(a, g)| a / g.sqrt()).collect();
        let w: Vec<f64> = wf.iter().zip(&diag).map(|(a, g)| a / g.sqrt()).collect();
        let mut x = vec![0.0; n];
        x[0] = t;
        let r = riemann_fd(&m, &x, h)?;
        let fd = r.sectional(&m.metric_at(&x)?, &u, &w);
        let cf = sectional_curvatures(profile, t, n)?.sectional_of(&uf, &wf);
        out.push(OracleSample {
            profile: name.clone(),
            n,
            t,
            u,
            w,
            closed_form: cf,
            finite_difference: fd,
            abs_error: (cf - fd).abs(),
            symmetry_defect: r.symmetry_defect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{channel_profile, tube_profile, CutoffProfile};

    struct RoundSphere;

    impl MetricField for RoundSphere {
        fn dim(&self) -> usize {
            2
        }
        fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_diagonal(&vec![1.0, x[0].sin().powi(2)].into()))
        }
    }

    #[test]
    fn unit_sphere_has_curvature_plus_one() {
        let x = [0.9, 0.3];
        let r = riemann_fd(&RoundSphere, &x, FD_STEP).unwrap();
        let g = RoundSphere.metric_at(&x).unwrap();
        let k = r.sectional(&g, &[1.0, 0.0], &[0.0, 1.0]);
        assert!((k - 1.0).abs() < 1e-6, "k = {k}");
    }

    #[test]
    fn flat_cylinder_has_zero_tensor() {
        let m = CoordinateMetric::new(WarpProfile::euclidean(10.0), 4).unwrap();
        let r = riemann_fd(&m, &[1.3, 0.2, 0.5, -0.4], FD_STEP).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        assert!(r.get(i, j, k, l).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn hyperbolic_t_phi_plane() {
        let m = CoordinateMetric::new(WarpProfile::hyperbolic(10.0), 4).unwrap();
        let x = [1.2, 0.0, 0.0, 0.0];
        let r = riemann_fd(&m, &x, FD_STEP).unwrap();
        let g = m.metric_at(&x).unwrap();
        let k = r.sectional(&g, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]);
        assert!((k + 1.0).abs() < 1e-6);
        assert!(r.symmetry_defect() < 1e-6);
        assert!(r.bianchi_defect() < 1e-6);
    }

    #[test]
    fn axis_stencil_is_rejected() {
        let m = CoordinateMetric::new(WarpProfile::hyperbolic(10.0), 4).unwrap();
        assert!(matches!(
            riemann_fd(&m, &[1e-4, 0.0, 0.0, 0.0], FD_STEP),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn non_unit_vector_is_rejected() {
        let m = CoordinateMetric::new(WarpProfile::exponential(10.0), 4).unwrap();
        let err = jacobi_operator(&m, &[1.0, 0.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0], JacobiPath::ClosedForm);
        assert!(matches!(err, Err(Error::NonUnitVector { .. })));
    }

    #[test]
    fn constant_curvature_jacobi_spectrum() {
        let m = CoordinateMetric::new(WarpProfile::exponential(10.0), 5).unwrap();
        let t = 2.0;
        let v = unit_from_frame(&m, t, &[0.3, -0.5, 0.2, 0.7, 0.1]).unwrap();
        let x = [t, 0.1, 0.2, 0.3, 0.4];
        for path in [JacobiPath::ClosedForm, JacobiPath::FiniteDifference { h: FD_STEP }] {
            let j = jacobi_operator(&m, &x, &v, path).unwrap();
            assert!(j.eigenvalues[4].abs() < 1e-6);
            for &e in &j.eigenvalues[..4] {
                assert!((e + 1.0).abs() < 1e-6, "{path:?}: {:?}", j.eigenvalues);
            }
            assert!((tr_sqrt_neg(&j, CLAMP_TOL).unwrap() - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn radial_direction_in_transition_zone() {
        let cut = CutoffProfile::new(6.0, 0.1).unwrap();
        let m = CoordinateMetric::new(tube_profile(&cut), 4).unwrap();
        let t = 2.4;
        let v = unit_from_frame(&m, t, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let j = jacobi_operator(&m, &[t, 0.0, 0.0, 0.0], &v, JacobiPath::ClosedForm).unwrap();
        let w = m.profile.values(t).unwrap();
        let mut expected = vec![0.0, -w.d2s / w.s, -w.d2c / w.c, -w.d2c / w.c];
        expected.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in j.eigenvalues.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_kills_v_and_is_symmetric() {
        let cut = CutoffProfile::new(6.0, 0.1).unwrap();
        let m = CoordinateMetric::new(channel_profile(&cut, 0.5).unwrap(), 4).unwrap();
        let t = 1.7;
        let frame = [0.4, 0.1, -0.8, 0.3];
        let v = unit_from_frame(&m, t, &frame).unwrap();
        let j = jacobi_operator(&m, &[t, 0.0, 0.0, 0.0], &v, JacobiPath::ClosedForm).unwrap();
        assert!(j.asymmetry() < 1e-12);
        let norm = frame.iter().map(|a| a * a).sum::<f64>().sqrt();
        for i in 0..4 {
            let jv: f64 = (0..4).map(|k| j.matrix[(i, k)] * frame[k] / norm).sum();
            assert!(jv.abs() < 1e-12);
        }
        assert!(j.eigenvalues.iter().any(|e| e.abs() < 1e-12));
    }

    #[test]
    fn tr_sqrt_neg_examples() {
        assert_eq!(tr_sqrt_neg_eigen(&[0.0, -1.0, -1.0, -1.0], CLAMP_TOL).unwrap(), 3.0);
        assert_eq!(tr_sqrt_neg_eigen(&[0.0, 0.0, 0.0], CLAMP_TOL).unwrap(), 0.0);
        assert_eq!(tr_sqrt_neg_eigen(&[0.0, -0.25, -1.0], CLAMP_TOL).unwrap(), 1.5);
        assert_eq!(tr_sqrt_neg_eigen(&[5e-8, -1.0], CLAMP_TOL).unwrap(), 1.0);
        assert!(matches!(
            tr_sqrt_neg_eigen(&[1e-3, -1.0], CLAMP_TOL),
            Err(Error::PositiveCurvature { .. })
        ));
    }
}
