//! Flat lattices for cusp cross-sections: enumeration of short vectors,
//! greedy minimal generators, the generator swap that produces the long
//! circle generator, and the complementary sublattice.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Points enumerated before giving up on a basis.
pub const ENUMERATION_LIMIT: usize = 2_000_000;
/// Padding applied to the squared enumeration radius.
pub const RADIUS_PADDING: f64 = 1.5;
/// Relative tolerance under which two squared norms count as a tie.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct FlatLattice {
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    covolume: f64,
}

impl TryFrom<Vec<Vec<f64>>> for FlatLattice {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        FlatLattice::from_rows(rows)
    }
}

impl From<FlatLattice> for Vec<Vec<f64>> {
    fn from(l: FlatLattice) -> Self {
        l.basis_vectors()
    }
}

/// A lattice vector with its integer coordinates in the defining basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticePoint {
    pub coeffs: Vec<i64>,
    pub vector: Vec<f64>,
    pub norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl FlatLattice {
    /// Basis given as rows. Rank may be below the ambient dimension.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rank = rows.len();
        if rank == 0 {
            return Err(Error::DegenerateLattice("empty basis".into()));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DegenerateLattice("basis vectors have different lengths".into()));
        }
        if rank > dim {
            return Err(Error::DegenerateLattice(format!(
                "{rank} vectors cannot be independent in R^{dim}"
            )));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateLattice("non-finite component".into()));
        }
        let basis = DMatrix::from_fn(rank, dim, |i, j| rows[i][j]);
        let gram = &basis * basis.transpose();
        let det = gram.determinant();
        let scale: f64 = (0..rank).map(|i| gram[(i, i)]).product();
        if !(det > 1e-12 * scale) || scale == 0.0 {
            return Err(Error::DegenerateLattice(format!(
                "basis is rank deficient (Gram determinant {det:e})"
            )));
        }
        Ok(Self { basis, gram, covolume: det.sqrt() })
    }

    /// Plain text: one basis vector per line, whitespace-separated decimal
    /// components, `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::LatticeParse {
                        line: lineno + 1,
                        msg: format!("{tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn covolume(&self) -> f64 {
        self.covolume
    }

    pub fn basis_vector(&self, i: usize) -> Vec<f64> {
        self.basis.row(i).iter().cloned().collect()
    }

    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.rank()).map(|i| self.basis_vector(i)).collect()
    }

    pub fn vector(&self, coeffs: &[i64]) -> Vec<f64> {
        let mut v = vec![0.0; self.ambient_dim()];
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0 {
                for (j, vj) in v.iter_mut().enumerate() {
                    *vj += c as f64 * self.basis[(i, j)];
                }
            }
        }
        v
    }

    fn norm2_of(&self, coeffs: &[i64]) -> f64 {
        let r = self.rank();
        let mut s = 0.0;
        for i in 0..r {
            if coeffs[i] == 0 {
                continue;
            }
            for j in 0..r {
                s += coeffs[i] as f64 * coeffs[j] as f64 * self.gram[(i, j)];
            }
        }
        s.max(0.0)
    }

    fn point(&self, coeffs: Vec<i64>) -> LatticePoint {
        let vector = self.vector(&coeffs);
        let norm = norm(&vector);
        LatticePoint { coeffs, vector, norm }
    }

    /// Multiplies every basis vector by `lambda`.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        Self::from_rows(
            self.basis_vectors()
                .into_iter()
                .map(|r| r.into_iter().map(|x| x * lambda).collect())
                .collect(),
        )
    }

    /// Applies a linear map (given as a square matrix acting on column
    /// vectors) to every basis vector.
    pub fn transform(&self, map: &DMatrix<f64>) -> Result<Self> {
        let moved = &self.basis * map.transpose();
        Self::from_rows((0..moved.nrows()).map(|i| moved.row(i).iter().cloned().collect()).collect())
    }

    /// All nonzero lattice vectors with `|v|^2 <= bound2`, one per `+-` pair
    /// (first nonzero coefficient positive), by Fincke-Pohst enumeration.
    pub fn enumerate(&self, bound2: f64, limit: usize) -> Result<Vec<LatticePoint>> {
        let r = self.rank();
        let chol = Cholesky::new(self.gram.clone())
            .ok_or_else(|| Error::DegenerateLattice("Gram matrix is not positive definite".into()))?;
        let upper = chol.l().transpose();
        let q: Vec<f64> = (0..r).map(|i| upper[(i, i)].powi(2)).collect();
        let mu = DMatrix::from_fn(r, r, |i, j| if j > i { upper[(i, j)] / upper[(i, i)] } else { 0.0 });

        let slack = bound2 * 1e-9;
        let mut out = Vec::new();
        let mut x = vec![0i64; r];
        let mut visited = 0usize;
        self.enumerate_level(r, &q, &mu, bound2 + slack, 0.0, &mut x, &mut out, &mut visited, limit)?;
        out.retain(|c: &Vec<i64>| c.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0));
        let mut pts: Vec<LatticePoint> = out
            .into_iter()
            .filter(|c| self.norm2_of(c) <= bound2 * (1.0 + 1e-9))
            .map(|c| self.point(c))
            .collect();
        pts.sort_by(compare_points);
        Ok(pts)
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_level(
        &self,
        level: usize,
        q: &[f64],
        mu: &DMatrix<f64>,
        bound: f64,
        partial: f64,
        x: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
        visited: &mut usize,
        limit: usize,
    ) -> Result<()> {
        if level == 0 {
            *visited += 1;
            if *visited > limit {
                return Err(Error::EnumerationOverflow { limit });
            }
            if x.iter().any(|&c| c != 0) {
                out.push(x.clone());
            }
            return Ok(());
        }
        let i = level - 1;
        let center: f64 = -(i + 1..x.len()).map(|j| mu[(i, j)] * x[j] as f64).sum::<f64>();
        let rem = bound - partial;
        if rem < 0.0 {
            return Ok(());
        }
        let radius = (rem / q[i]).sqrt();
        if radius > 1e9 {
            return Err(Error::EnumerationOverflow { limit });
        }
        let lo = (center - radius).ceil() as i64;
        let hi = (center + radius).floor() as i64;
        for xi in lo..=hi {
            let d = xi as f64 - center;
            x[i] = xi;
            self.enumerate_level(level - 1, q, mu, bound, partial + q[i] * d * d, x, out, visited, limit)?;
        }
        x[i] = 0;
        Ok(())
    }
}

/// Shorter first; among ties (relative `1e-12`) the lexicographically
/// greatest sign-normalized coefficient vector wins, which prefers vectors
/// built from earlier basis elements.
fn compare_points(a: &LatticePoint, b: &LatticePoint) -> Ordering {
    let (na, nb) = (a.norm * a.norm, b.norm * b.norm);
    if (na - nb).abs() <= TIE_TOL * na.max(nb) {
        b.coeffs.cmp(&a.coeffs)
    } else {
        na.total_cmp(&nb)
    }
}

pub fn covolume(l: &FlatLattice) -> f64 {
    l.covolume()
}

pub fn rescale(l: &FlatLattice, lambda: f64) -> Result<FlatLattice> {
    l.rescale(lambda)
}

/// A nonzero lattice vector of minimal norm, ties broken as in the
/// enumeration order.
pub fn shortest_vector(l: &FlatLattice) -> Result<LatticePoint> {
    let bound2 = RADIUS_PADDING * (0..l.rank()).map(|i| l.gram[(i, i)]).fold(f64::INFINITY, f64::min);
    let pts = l.enumerate(bound2, ENUMERATION_LIMIT)?;
    pts.into_iter()
        .next()
        .ok_or_else(|| Error::DegenerateLattice("no nonzero vector found".into()))
}

/// Determinant of an integer matrix by fraction-free Gaussian elimination.
fn int_det(rows: &[Vec<i128>]) -> i128 {
    let n = rows.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = rows.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// True when the rows (integer coordinates) extend to a basis of `Z^r`,
/// i.e. the gcd of the maximal minors is 1.
fn extends_to_basis(rows: &[Vec<i64>], subsets: &[Vec<usize>]) -> bool {
    let mut g = 0i128;
    for cols in subsets {
        let minor: Vec<Vec<i128>> = rows
            .iter()
            .map(|r| cols.iter().map(|&c| r[c] as i128).collect())
            .collect();
        g = gcd(g, int_det(&minor));
        if g == 1 {
            return true;
        }
    }
    false
}

/// Which generator replaces `alpha_1` when building the long circle generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapForm {
    /// `gamma_1 = alpha_1 + k alpha_2`: change of basis has determinant 1.
    Unimodular,
    /// `gamma_1 = k alpha_1 + alpha_2`: generates a sublattice of index `k`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSwap {
    pub form: SwapForm,
    pub k: u64,
    pub l_min: f64,
    pub gamma1: Vec<f64>,
    pub gamma1_norm: f64,
    /// Determinant of `(gamma_1, alpha_2, ..., alpha_m)` in `alpha` coordinates.
    pub change_of_basis_det: i64,
    /// Index of the generated sublattice in the input lattice.
    pub covering_index: u64,
}

impl GeneratorSwap {
    /// `gamma_1` in alpha coordinates.
    pub fn gamma1_coeffs(&self, rank: usize) -> Vec<i64> {
        let mut c = vec![0; rank];
        let k = self.k as i64;
        match self.form {
            SwapForm::Unimodular => (c[0], c[1]) = (1, k),
            SwapForm::Literal => (c[0], c[1]) = (k, 1),
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSystem {
    pub alphas: Vec<Vec<f64>>,
    pub alpha_coeffs: Vec<Vec<i64>>,
    pub norms: Vec<f64>,
    /// `alpha_i` in coordinates where it is `(a_i1, ..., a_ii, 0, ...)`, `a_ii > 0`.
    pub canonical: Vec<Vec<f64>>,
    /// Determinant of the alpha coordinates against the input basis (`+-1`).
    pub unimodular_check: i64,
    pub swap: Option<GeneratorSwap>,
}

impl GeneratorSystem {
    pub fn rank(&self) -> usize {
        self.alphas.len()
    }
}

/// Gram-Schmidt: returns orthonormal directions and each vector's
/// coordinates along them.
fn gram_schmidt(vs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut qs: Vec<Vec<f64>> = Vec::new();
    let mut coords = Vec::new();
    for v in vs {
        let mut res = v.clone();
        let mut row = Vec::new();
        for q in &qs {
            let p = dot(v, q);
            row.push(p);
            for (r, qi) in res.iter_mut().zip(q) {
                *r -= p * qi;
            }
        }
        let nr = norm(&res);
        row.push(nr);
        qs.push(res.into_iter().map(|x| x / nr).collect());
        coords.push(row);
    }
    (qs, coords)
}

/// `alpha_1` minimal in `L \ {0}`, then each `alpha_i` minimal among
/// vectors outside `<alpha_1, ..., alpha_{i-1}>` such that the system still
/// extends to a basis of `L`. The result is a basis of `L`.
pub fn greedy_generators(l: &FlatLattice) -> Result<GeneratorSystem> {
    let r = l.rank();
    let subsets: Vec<Vec<Vec<usize>>> = (0..=r).map(|k| combinations(r, k)).collect();
    let mut bound2 = RADIUS_PADDING * (0..r).map(|i| l.gram[(i, i)]).fold(0.0, f64::max);
    'radius: loop {
        let pts = l.enumerate(bound2, ENUMERATION_LIMIT)?;
        let mut chosen: Vec<LatticePoint> = Vec::with_capacity(r);
        for step in 0..r {
            let mut rows: Vec<Vec<i64>> = chosen.iter().map(|p| p.coeffs.clone()).collect();
            rows.push(vec![0; r]);
            let mut best: Option<&LatticePoint> = None;
            for p in &pts {
                if let Some(b) = best {
                    let (nb, np) = (b.norm * b.norm, p.norm * p.norm);
                    if np - nb > TIE_TOL * np {
                        break;
                    }
                }
                rows[step].clone_from(&p.coeffs);
                if extends_to_basis(&rows, &subsets[step + 1]) {
                    match best {
                        None => best = Some(p),
                        Some(b) if compare_points(p, b) == Ordering::Less => best = Some(p),
                        _ => {}
                    }
                }
            }
            match best {
                Some(p) => chosen.push(p.clone()),
                None => {
                    bound2 *= 4.0;
                    continue 'radius;
                }
            }
        }
        let coeffs: Vec<Vec<i64>> = chosen.iter().map(|p| p.coeffs.clone()).collect();
        let det = int_det(&coeffs.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect::<Vec<_>>());
        if det.abs() != 1 {
            return Err(Error::DegenerateLattice(format!(
                "greedy system has integer determinant {det}"
            )));
        }
        let alphas: Vec<Vec<f64>> = chosen.iter().map(|p| p.vector.clone()).collect();
        let (_, canonical) = gram_schmidt(&alphas);
        let canonical = canonical
            .into_iter()
            .map(|mut row| {
                row.resize(r, 0.0);
                row
            })
            .collect();
        return Ok(GeneratorSystem {
            norms: chosen.iter().map(|p| p.norm).collect(),
            alphas,
            alpha_coeffs: coeffs,
            canonical,
            unimodular_check: det as i64,
            swap: None,
        });
    }
}

/// Smallest `k >= 1` with `|gamma_1| >= l_min`, where `gamma_1` is built per `form`.
pub fn choose_k(gs: &GeneratorSystem, l_min: f64, form: SwapForm) -> Result<GeneratorSwap> {
    if gs.rank() < 2 {
        return Err(Error::Precondition("generator swap needs rank >= 2".into()));
    }
    if !(l_min > 0.0) || !l_min.is_finite() {
        return Err(Error::InvalidArgument(format!("l_min must be > 0, got {l_min}")));
    }
    let (a1, a2) = (&gs.alphas[0], &gs.alphas[1]);
    let build = |k: u64| -> Vec<f64> {
        let kf = k as f64;
        match form {
            SwapForm::Unimodular => a1.iter().zip(a2).map(|(x, y)| x + kf * y).collect(),
            SwapForm::Literal => a1.iter().zip(a2).map(|(x, y)| kf * x + y).collect(),
        }
    };
    let long = |k: u64| norm(&build(k)) >= l_min;
    let (grow, fixed) = match form {
        SwapForm::Unimodular => (norm(a2), norm(a1)),
        SwapForm::Literal => (norm(a1), norm(a2)),
    };
    // |gamma_1(k)|^2 is convex in k, so the short set is an interval starting at 1.
    let mut hi = ((l_min + fixed) / grow).ceil().max(1.0) as u64;
    while !long(hi) {
        hi *= 2;
    }
    let k = if long(1) {
        1
    } else {
        let mut lo = 1u64;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if long(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let gamma1 = build(k);
    let m = gs.rank();
    let mut rows: Vec<Vec<i128>> = (0..m)
        .map(|i| (0..m).map(|j| i128::from(i == j)).collect())
        .collect();
    match form {
        SwapForm::Unimodular => rows[0][1] = k as i128,
        SwapForm::Literal => {
            rows[0][0] = k as i128;
            rows[0][1] = 1;
        }
    }
    let det = int_det(&rows);
    if form == SwapForm::Literal && k > 1 {
        log::warn!(
            "literal generator swap k*alpha_1 + alpha_2 with k = {k} generates a sublattice of index {k}"
        );
    }
    Ok(GeneratorSwap {
        form,
        k,
        l_min,
        gamma1_norm: norm(&gamma1),
        gamma1,
        change_of_basis_det: det as i64,
        covering_index: det.unsigned_abs() as u64,
    })
}

/// `Delta = <alpha_2, ..., alpha_m>` in orthonormal coordinates of its span.
pub fn sublattice_delta(gs: &GeneratorSystem) -> Result<FlatLattice> {
    if gs.rank() < 2 {
        return Err(Error::Precondition("Delta needs rank >= 2".into()));
    }
    let (_, coords) = gram_schmidt(&gs.alphas[1..]);
    let k = gs.rank() - 1;
    FlatLattice::from_rows(
        coords
            .into_iter()
            .map(|mut row| {
                row.resize(k, 0.0);
                row
            })
            .collect(),
    )
}

/// How `Delta` acts on `R^{m} / <gamma_1> = S^1 x gamma_1^perp`: each
/// generator rotates the circle by `twist` (fraction of a turn) and
/// translates `gamma_1^perp` by the projected vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaAction {
    pub twists: Vec<f64>,
    pub projected: FlatLattice,
}

pub fn delta_action(gs: &GeneratorSystem, swap: &GeneratorSwap) -> Result<DeltaAction> {
    let m = gs.rank();
    if m < 2 {
        return Err(Error::Precondition("Delta needs rank >= 2".into()));
    }
    // Work in alpha coordinates: for large k, gamma_1 is nearly parallel to
    // one alpha and subtracting its projection directly loses ~k^2 ulps.
    let c: Vec<f64> = swap.gamma1_coeffs(m).into_iter().map(|x| x as f64).collect();
    let g = |i: usize, j: usize| dot(&gs.alphas[i], &gs.alphas[j]);
    let gv: Vec<f64> = (0..m).map(|i| (0..m).map(|l| c[l] * g(i, l)).sum()).collect();
    let gg = dot(&swap.gamma1, &swap.gamma1);
    let mut twists = Vec::new();
    let mut projected = Vec::new();
    for j in 1..m {
        let mu = gv[j] / gg;
        let own = (0..m).filter(|&l| l != j).map(|l| c[l] * gv[l]).sum::<f64>() / gg;
        let mut p = vec![0.0; gs.alphas[0].len()];
        for (i, a) in gs.alphas.iter().enumerate() {
            let x = if i == j { own } else { -mu * c[i] };
            for (pk, ak) in p.iter_mut().zip(a) {
                *pk += x * ak;
            }
        }
        twists.push(mu);
        projected.push(p);
    }
    let (_, coords) = gram_schmidt(&projected);
    let rows = coords
        .into_iter()
        .map(|mut row| {
            row.resize(m - 1, 0.0);
            row
        })
        .collect();
    Ok(DeltaAction { twists, projected: FlatLattice::from_rows(rows)? })
}
