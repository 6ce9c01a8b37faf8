//! Combinatorial limits of `Z_p = (A^{p/2} B^p A^{p/2})^{1/p}` as `p → ∞`.
//!
//! Everything is computed in the eigenbasis of `A` (so `A` is diagonal and
//! `U = V*W` carries the relative position of `B`), then rotated back.
//! The limit eigenvalues are ratios of `η_k = max{a_I b_J : det U_{I,J} ≠ 0}`;
//! the limit matrix comes from the rank-one matrices `Q` on `Λ^k C^d` at each
//! spectral gap.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::antisym::{enumerate_subsets, minor, minor_scale, subspace_from_decomposable, IndexSet, WedgeVector};
use crate::error::{Error, Result};
use crate::logval::LogValue;
use crate::matnum::{complete_basis, multi_product_numeric, op_norm, relative_frame, z_p_matrix_numeric, CMatrix, PsdMatrix};

pub const DEFAULT_MINOR_TOL: f64 = 1e-10;
pub const DEFAULT_SPEC_TOL: f64 = 1e-9;
pub const DEFAULT_GROUP_TOL: f64 = 1e-6;
/// Tolerance for recovering a subspace from `Q`'s principal eigenvector.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// `1e-9 · d`, the log-domain tolerance for equal products.
pub fn default_product_tol(d: usize) -> f64 {
    1e-9 * d as f64
}

/// Tolerances for the limit constructions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    /// `|det U_{I,J}|` counts as nonzero above `minor_tol` times the product of column norms.
    pub minor_tol: f64,
    /// Log-domain absolute tolerance for equal products; `None` means `1e-9 · d`.
    pub product_tol: Option<f64>,
    /// Relative tolerance for equal eigenvalues of the inputs.
    pub spec_tol: f64,
    /// `Q` is rank one when its second eigenvalue is at most `group_tol` times the first.
    pub group_tol: f64,
    /// Values of `p` at which `‖Z_p − Z‖` is reported.
    pub verify_grid: Vec<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            minor_tol: DEFAULT_MINOR_TOL,
            product_tol: None,
            spec_tol: DEFAULT_SPEC_TOL,
            group_tol: DEFAULT_GROUP_TOL,
            verify_grid: vec![256.0, 1024.0, 4096.0],
        }
    }
}

impl Tolerances {
    pub fn product_tol(&self, d: usize) -> f64 {
        self.product_tol.unwrap_or_else(|| default_product_tol(d))
    }
}

fn check_pair(a: &PsdMatrix, b: &PsdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

fn log_values(x: &[f64]) -> Vec<LogValue> {
    x.iter().map(|&v| LogValue::from_real(v)).collect()
}

fn nonzero_minor(u: &CMatrix, i: &IndexSet, j: &IndexSet, minor_tol: f64) -> bool {
    let scale = minor_scale(u, i, j);
    scale > 0.0 && minor(u, i, j).expect("equal cardinalities").norm() > minor_tol * scale
}

/// Subsets sorted by decreasing product, ties by lexicographic rank.
fn by_product(sets: &[IndexSet], x: &[LogValue]) -> Vec<(LogValue, usize)> {
    let mut v: Vec<(LogValue, usize)> = sets.iter().enumerate().map(|(r, s)| (s.product(x), r)).collect();
    v.sort_by(|l, r| r.0.partial_cmp(&l.0).unwrap().then(l.1.cmp(&r.1)));
    v
}

/// `η_1, …, η_d` with maximizing pairs.
#[derive(Clone, Debug)]
pub struct EtaSequence {
    pub d: usize,
    /// `values[k-1] = η_k`.
    pub values: Vec<LogValue>,
    /// `witnesses[k-1]` attains `η_k`; `None` when `η_k = 0`.
    pub witnesses: Vec<Option<(IndexSet, IndexSet)>>,
}

impl EtaSequence {
    /// `λ_k = η_k / η_{k-1}` (with `η_0 = 1`), zero once `η_k = 0`.
    pub fn limit_eigenvalues(&self) -> Vec<LogValue> {
        let mut prev = LogValue::ONE;
        self.values
            .iter()
            .map(|&eta| {
                if eta.is_zero() || prev.is_zero() {
                    prev = LogValue::ZERO;
                    return LogValue::ZERO;
                }
                let l = eta / prev;
                prev = eta;
                l
            })
            .collect()
    }
}

fn eta_k(u: &CMatrix, a: &[LogValue], b: &[LogValue], k: usize, minor_tol: f64) -> Result<(LogValue, Option<(IndexSet, IndexSet)>)> {
    let d = a.len();
    let sets = enumerate_subsets(d, k)?;
    let ai = by_product(&sets, a);
    let bj = by_product(&sets, b);
    let b_first = bj[0].0;
    let mut best = LogValue::ZERO;
    let mut witness = None;
    for &(pa, ri) in &ai {
        if !(pa * b_first > best) {
            break;
        }
        for &(pb, rj) in &bj {
            let prod = pa * pb;
            if !(prod > best) {
                break;
            }
            if nonzero_minor(u, &sets[ri], &sets[rj], minor_tol) {
                best = prod;
                witness = Some((sets[ri].clone(), sets[rj].clone()));
                break;
            }
        }
    }
    Ok((best, witness))
}

/// `η_k = max{a_I b_J : det(V*W)_{I,J} ≠ 0}` for `k = 1, …, d`.
///
/// Index sets are visited in decreasing `a_I` and `b_J` order and abandoned once
/// the best achievable product cannot beat the current maximum.
pub fn eta_sequence(a: &PsdMatrix, b: &PsdMatrix, minor_tol: f64) -> Result<EtaSequence> {
    check_pair(a, b)?;
    let d = a.dim();
    let u = relative_frame(a.eigenvectors(), b.eigenvectors());
    let (la, lb) = (log_values(a.eigenvalues()), log_values(b.eigenvalues()));
    let per_k: Vec<_> = (1..=d).into_par_iter().map(|k| eta_k(&u, &la, &lb, k, minor_tol)).collect::<Result<_>>()?;
    let (values, witnesses) = per_k.into_iter().unzip();
    Ok(EtaSequence { d, values, witnesses })
}

/// Eigenvalues of `lim Z_p`, decreasing.
pub fn limit_eigenvalues(a: &PsdMatrix, b: &PsdMatrix, minor_tol: f64) -> Result<Vec<LogValue>> {
    Ok(eta_sequence(a, b, minor_tol)?.limit_eigenvalues())
}

fn within(x: LogValue, target: LogValue, tol: f64) -> bool {
    !x.is_zero() && (x.logmag() - target.logmag()).abs() <= tol
}

fn delta_from(u: &CMatrix, a: &[LogValue], b: &[LogValue], k: usize, eta: LogValue, minor_tol: f64, product_tol: f64) -> Result<Vec<(IndexSet, IndexSet)>> {
    let sets = enumerate_subsets(a.len(), k)?;
    let ai = by_product(&sets, a);
    let bj = by_product(&sets, b);
    let floor = eta.logmag() - product_tol;
    let mut out = Vec::new();
    for &(pa, ri) in &ai {
        let top = pa * bj[0].0;
        if top.is_zero() || top.logmag() < floor {
            break;
        }
        for &(pb, rj) in &bj {
            let prod = pa * pb;
            if prod.is_zero() || prod.logmag() < floor {
                break;
            }
            if within(prod, eta, product_tol) && nonzero_minor(u, &sets[ri], &sets[rj], minor_tol) {
                out.push((sets[ri].clone(), sets[rj].clone()));
            }
        }
    }
    out.sort_by_key(|(i, j)| (i.rank(), j.rank()));
    Ok(out)
}

/// Pairs `(I, K)` with `det U_{I,K} ≠ 0` and `a_I b_K = η_k` (within `product_tol` in log).
pub fn delta_set(a: &PsdMatrix, b: &PsdMatrix, k: usize, minor_tol: f64, product_tol: f64) -> Result<Vec<(IndexSet, IndexSet)>> {
    let eta = eta_sequence(a, b, minor_tol)?;
    let d = a.dim();
    if k == 0 || k > d {
        return Err(Error::BadCardinality { d, k });
    }
    let e = eta.values[k - 1];
    if e.is_zero() {
        return Err(Error::EtaZero { k });
    }
    let u = relative_frame(a.eigenvectors(), b.eigenvectors());
    delta_from(&u, &log_values(a.eigenvalues()), &log_values(b.eigenvalues()), k, e, minor_tol, product_tol)
}

/// One spectral group of the limit.
#[derive(Clone, Debug)]
pub struct LimitGroup {
    /// 1-based index range `first..=last` of the limit eigenvalues in this group.
    pub first: usize,
    pub last: usize,
    pub eigenvalues: Vec<LogValue>,
    pub projection: CMatrix,
}

/// Residual of the finite-`p` matrix against the limit.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub p: f64,
    /// `‖Z_p − Z‖` in operator norm.
    pub residual: f64,
    /// `residual / λ_1`.
    pub relative: f64,
}

/// Outcome of the maximal-case criterion.
#[derive(Clone, Debug)]
pub struct MaximalVerdict {
    pub holds: bool,
    /// Smallest boundary `k` where no admissible nonzero minor exists.
    pub failing_k: Option<usize>,
    /// `(k, I_k, J_k)` for each boundary that passed.
    pub witnesses: Vec<(usize, IndexSet, IndexSet)>,
    /// Whether the limit eigenvalues equal `(a_i b_i)` within the product tolerance.
    pub eigenvalues_match: bool,
}

#[derive(Clone, Debug)]
pub struct LimitReport {
    pub limit_eigenvalues: Vec<LogValue>,
    pub limit_matrix: PsdMatrix,
    pub groups: Vec<LimitGroup>,
    pub maximal: Option<MaximalVerdict>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Group boundaries `k_1 < … < k_s`: the last index of each run of equal
/// positive eigenvalues, followed by `d` for the zero tail if present.
fn boundaries(lambda: &[LogValue], product_tol: f64) -> Vec<usize> {
    let d = lambda.len();
    let rank = lambda.iter().take_while(|l| !l.is_zero()).count();
    let mut out = Vec::new();
    for k in 1..=rank {
        if k == rank || (lambda[k - 1].logmag() - lambda[k].logmag()).abs() > product_tol {
            out.push(k);
        }
    }
    if rank < d {
        out.push(d);
    }
    out
}

/// `Q = Σ_K v_K v_K*` over coefficient columns, its principal eigenvector, and
/// the recovered `k`-dimensional span.
fn span_from_coefficients(d: usize, k: usize, columns: &BTreeMap<usize, Vec<(usize, Complex64)>>, group_tol: f64) -> Result<CMatrix> {
    let mut rows: Vec<usize> = columns.values().flat_map(|c| c.iter().map(|(r, _)| *r)).collect();
    rows.sort_unstable();
    rows.dedup();
    let pos: BTreeMap<usize, usize> = rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let n = rows.len();
    let mut q = CMatrix::zeros(n, n);
    for col in columns.values() {
        for &(ri, wi) in col {
            for &(rj, wj) in col {
                q[(pos[&ri], pos[&rj])] += wi * wj.conj();
            }
        }
    }
    if n == 0 {
        return Err(Error::EtaZero { k });
    }
    let eig = q.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap().then(x.cmp(&y)));
    let mu1 = eig.eigenvalues[order[0]];
    let ratio = if n > 1 { eig.eigenvalues[order[1]].max(0.0) / mu1 } else { 0.0 };
    if !(mu1 > 0.0) || ratio > group_tol {
        return Err(Error::QNotRankOne { k, ratio });
    }
    let len = crate::antisym::binomial(d, k);
    let mut coords = vec![Complex64::new(0.0, 0.0); len];
    for (i, &r) in rows.iter().enumerate() {
        coords[r] = eig.eigenvectors[(i, order[0])];
    }
    let psi = WedgeVector::new(d, k, coords)?;
    Ok(subspace_from_decomposable(&psi, SUBSPACE_TOL)?.basis)
}

/// Split nested spans into orthonormal group bases and assemble the report.
fn assemble(
    frame: &CMatrix,
    lambda: &[LogValue],
    bounds: &[usize],
    spans: Vec<CMatrix>,
) -> (PsdMatrix, Vec<LimitGroup>) {
    let d = lambda.len();
    let mut taken = CMatrix::zeros(d, 0);
    let mut groups = Vec::new();
    let mut values = Vec::with_capacity(d);
    let mut vectors: Vec<CMatrix> = Vec::new();
    let mut prev = 0;
    for (&k, span) in bounds.iter().zip(spans) {
        let need = k - prev;
        let proj_out = CMatrix::identity(d, d) - &taken * taken.adjoint();
        let fresh = if k == d {
            let full = complete_basis(&taken);
            full.columns(prev, need).into_owned()
        } else {
            let m = proj_out * span;
            let svd = m.svd(true, false);
            let uu = svd.u.expect("requested left singular vectors");
            let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
            idx.sort_by(|&x, &y| svd.singular_values[y].partial_cmp(&svd.singular_values[x]).unwrap().then(x.cmp(&y)));
            CMatrix::from_columns(&idx[..need].iter().map(|&i| uu.column(i).into_owned()).collect::<Vec<_>>())
        };
        let rep = lambda[k - 1];
        for _ in 0..need {
            values.push(rep.to_real());
        }
        let global = frame * &fresh;
        groups.push(LimitGroup {
            first: prev + 1,
            last: k,
            eigenvalues: lambda[prev..k].to_vec(),
            projection: &global * global.adjoint(),
        });
        vectors.push(global);
        taken = CMatrix::from_columns(
            &taken.column_iter().map(|c| c.into_owned()).chain(fresh.column_iter().map(|c| c.into_owned())).collect::<Vec<_>>(),
        );
        prev = k;
    }
    let cols: Vec<_> = vectors.iter().flat_map(|m| m.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>()).collect();
    let e = CMatrix::from_columns(&cols);
    (PsdMatrix::from_parts_unchecked(values, e), groups)
}

fn diagnostics(z: &PsdMatrix, lambda1: f64, grid: &[f64], numeric: impl Fn(f64) -> Result<PsdMatrix> + Sync) -> Result<Vec<Diagnostic>> {
    let zm = z.to_matrix();
    grid.par_iter()
        .map(|&p| {
            let residual = op_norm(&(numeric(p)?.to_matrix() - &zm));
            Ok(Diagnostic { p, residual, relative: if lambda1 > 0.0 { residual / lambda1 } else { residual } })
        })
        .collect()
}

/// `Z = lim Z_p` with its spectral groups.
///
/// At each boundary `k < d` of a run of equal positive eigenvalues, the pairs
/// in `Δ_k` define `Q_{I,J} = Σ_K w_{I,K} conj(w_{J,K})`, whose principal
/// eigenvector is the wedge of the top-`k` limit eigenvectors. The zero group,
/// if any, is the complement of the positive spans.
pub fn limit_matrix(a: &PsdMatrix, b: &PsdMatrix, tol: &Tolerances) -> Result<LimitReport> {
    check_pair(a, b)?;
    let d = a.dim();
    let product_tol = tol.product_tol(d);
    let eta = eta_sequence(a, b, tol.minor_tol)?;
    let lambda = eta.limit_eigenvalues();
    let u = relative_frame(a.eigenvectors(), b.eigenvectors());
    let (la, lb) = (log_values(a.eigenvalues()), log_values(b.eigenvalues()));
    let bounds = boundaries(&lambda, product_tol);
    let spans: Vec<CMatrix> = bounds
        .par_iter()
        .map(|&k| {
            if k == d || eta.values[k - 1].is_zero() {
                return Ok(CMatrix::zeros(d, 0));
            }
            let delta = delta_from(&u, &la, &lb, k, eta.values[k - 1], tol.minor_tol, product_tol)?;
            let mut columns: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
            for (i, kk) in &delta {
                columns.entry(kk.rank()).or_default().push((i.rank(), minor(&u, i, kk)?));
            }
            span_from_coefficients(d, k, &columns, tol.group_tol)
        })
        .collect::<Result<_>>()?;
    let (z, groups) = assemble(a.eigenvectors(), &lambda, &bounds, spans);
    let lambda1 = lambda.first().map_or(0.0, |l| l.to_real());
    let diagnostics = diagnostics(&z, lambda1, &tol.verify_grid, |p| z_p_matrix_numeric(a, b, p))?;
    Ok(LimitReport { limit_eigenvalues: lambda, limit_matrix: z, groups, maximal: None, diagnostics })
}

/// Last indices of runs of equal values (relative `spec_tol`), `d` included.
pub fn multiplicity_boundaries(x: &[f64], spec_tol: f64) -> Vec<usize> {
    let d = x.len();
    let mut out = Vec::new();
    for i in 1..=d {
        if i == d || (x[i - 1] - x[i]).abs() > spec_tol * x[i - 1].abs() {
            out.push(i);
        }
    }
    out
}

/// `k`-subsets `S` with `{0..lo} ⊂ S ⊂ {0..hi}`.
fn sandwiched(d: usize, k: usize, lo: usize, hi: usize) -> Vec<IndexSet> {
    let free = k - lo;
    let pool: Vec<usize> = (lo..hi).collect();
    if free == 0 {
        return vec![IndexSet::leading(d, k)];
    }
    enumerate_subsets(pool.len(), free)
        .expect("valid block")
        .into_iter()
        .map(|s| IndexSet::new(d, (0..lo).chain(s.members().iter().map(|&m| pool[m])).collect()).expect("distinct"))
        .collect()
}

fn block_of(bounds: &[usize], k: usize) -> (usize, usize) {
    let r = bounds.iter().position(|&b| k <= b).expect("k ≤ d");
    (if r == 0 { 0 } else { bounds[r - 1] }, bounds[r])
}

/// The criterion for `λ_i = a_i b_i` for all `i`: at every multiplicity boundary
/// `k` of either spectrum there are `I_k`, `J_k` sandwiched between consecutive
/// block boundaries with `det(V*W)_{I_k,J_k} ≠ 0`.
pub fn check_maximal(a: &PsdMatrix, b: &PsdMatrix, minor_tol: f64, spec_tol: f64) -> Result<MaximalVerdict> {
    check_pair(a, b)?;
    let d = a.dim();
    let u = relative_frame(a.eigenvectors(), b.eigenvectors());
    let ia = multiplicity_boundaries(a.eigenvalues(), spec_tol);
    let jb = multiplicity_boundaries(b.eigenvalues(), spec_tol);
    let mut ks: Vec<usize> = ia.iter().chain(jb.iter()).copied().filter(|&k| k < d).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut witnesses = Vec::new();
    let mut failing_k = None;
    for &k in &ks {
        let (alo, ahi) = block_of(&ia, k);
        let (blo, bhi) = block_of(&jb, k);
        let is = sandwiched(d, k, alo, ahi);
        let js = sandwiched(d, k, blo, bhi);
        let found = is.iter().find_map(|i| js.iter().find(|j| nonzero_minor(&u, i, j, minor_tol)).map(|j| (i.clone(), j.clone())));
        match found {
            Some((i, j)) => witnesses.push((k, i, j)),
            None => {
                failing_k = Some(k);
                break;
            }
        }
    }
    let lambda = limit_eigenvalues(a, b, minor_tol)?;
    let product_tol = default_product_tol(d);
    let eigenvalues_match = lambda.iter().zip(a.eigenvalues().iter().zip(b.eigenvalues())).all(|(l, (&x, &y))| {
        let t = LogValue::from_real(x) * LogValue::from_real(y);
        (l.is_zero() && t.is_zero()) || within(*l, t, product_tol)
    });
    Ok(MaximalVerdict { holds: failing_k.is_none(), failing_k, witnesses, eigenvalues_match })
}

/// The limit in the maximal case.
///
/// With distinct eigenvalues of `A` this is `V diag(a_i b_i) V*`. Otherwise each
/// block of equal `a_i` is an exact spectral projection of the limit; the
/// splitting inside a block is taken from [`limit_matrix`] and compressed onto
/// the block.
pub fn maximal_limit(a: &PsdMatrix, b: &PsdMatrix, tol: &Tolerances) -> Result<LimitReport> {
    let verdict = check_maximal(a, b, tol.minor_tol, tol.spec_tol)?;
    if let Some(k) = verdict.failing_k {
        return Err(Error::MaximalityFails { k });
    }
    let d = a.dim();
    let v = a.eigenvectors();
    let products: Vec<LogValue> =
        a.eigenvalues().iter().zip(b.eigenvalues()).map(|(&x, &y)| LogValue::from_real(x) * LogValue::from_real(y)).collect();
    let ia = multiplicity_boundaries(a.eigenvalues(), tol.spec_tol);
    let z;
    let mut groups = Vec::new();
    if ia.len() == d {
        z = PsdMatrix::from_parts_unchecked(products.iter().map(|l| l.to_real()).collect(), v.clone());
        for i in 0..d {
            let col = v.column(i).into_owned();
            groups.push(LimitGroup { first: i + 1, last: i + 1, eigenvalues: vec![products[i]], projection: &col * col.adjoint() });
        }
    } else {
        let general = limit_matrix(a, b, &Tolerances { verify_grid: vec![], ..tol.clone() })?;
        let zg = general.limit_matrix.to_matrix();
        let mut acc = CMatrix::zeros(d, d);
        let mut prev = 0;
        for &hi in &ia {
            let vb = v.columns(prev, hi - prev).into_owned();
            let proj = &vb * vb.adjoint();
            acc += &proj * &zg * &proj;
            groups.push(LimitGroup { first: prev + 1, last: hi, eigenvalues: products[prev..hi].to_vec(), projection: proj });
            prev = hi;
        }
        z = PsdMatrix::from_matrix(crate::matnum::hermitian_part(&acc))?;
    }
    let lambda1 = products.first().map_or(0.0, |l| l.to_real());
    let diagnostics = diagnostics(&z, lambda1, &tol.verify_grid, |p| z_p_matrix_numeric(a, b, p))?;
    Ok(LimitReport { limit_eigenvalues: products, limit_matrix: z, groups, maximal: Some(verdict), diagnostics })
}

/// A coefficient of the grouped product: sum of chain products sharing one
/// interior eigenvalue product.
#[derive(Clone, Debug)]
struct Term {
    level: f64,
    interior: LogValue,
    value: Complex64,
    /// Sum of the magnitude scales of the summed chains, for the nonzero test.
    scale: f64,
}

fn add_term(bucket: &mut Vec<Term>, t: Term, product_tol: f64) {
    if let Some(e) = bucket.iter_mut().find(|e| (e.level - t.level).abs() <= product_tol) {
        e.value += t.value;
        e.scale += t.scale;
    } else {
        bucket.push(t);
    }
}

/// `w_k(I, ·, K)` grouped by interior product, for all `I, K ∈ I_d(k)`.
fn grouped_coefficients(mats: &[PsdMatrix], k: usize, product_tol: f64) -> Result<(Vec<IndexSet>, Vec<Vec<Vec<Term>>>)> {
    let d = mats[0].dim();
    let sets = enumerate_subsets(d, k)?;
    let n = sets.len();
    let frames: Vec<CMatrix> = (0..mats.len() - 1).map(|l| relative_frame(mats[l].eigenvectors(), mats[l + 1].eigenvectors())).collect();
    let minors = |u: &CMatrix| -> Vec<Vec<(Complex64, f64)>> {
        sets.iter().map(|i| sets.iter().map(|j| (minor(u, i, j).unwrap(), minor_scale(u, i, j))).collect()).collect()
    };
    let first = minors(&frames[0]);
    let mut x: Vec<Vec<Vec<Term>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (v, s) = first[i][j];
                    if v.norm() == 0.0 {
                        vec![]
                    } else {
                        vec![Term { level: 0.0, interior: LogValue::ONE, value: v, scale: s }]
                    }
                })
                .collect()
        })
        .collect();
    for l in 1..mats.len() - 1 {
        let wl = minors(&frames[l]);
        let al: Vec<LogValue> = sets.iter().map(|s| s.product(&log_values(mats[l].eigenvalues()))).collect();
        let next: Vec<Vec<Vec<Term>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|jn| {
                        let mut bucket = Vec::new();
                        for j in 0..n {
                            if al[j].is_zero() || wl[j][jn].0.norm() == 0.0 {
                                continue;
                            }
                            for t in &x[i][j] {
                                add_term(
                                    &mut bucket,
                                    Term {
                                        level: t.level + al[j].logmag(),
                                        interior: t.interior * al[j],
                                        value: t.value * wl[j][jn].0,
                                        scale: t.scale * wl[j][jn].1,
                                    },
                                    product_tol,
                                );
                            }
                        }
                        bucket
                    })
                    .collect()
            })
            .collect();
        x = next;
    }
    Ok((sets, x))
}

struct MultiEta {
    values: Vec<LogValue>,
}

fn multi_eta(mats: &[PsdMatrix], minor_tol: f64, product_tol: f64) -> Result<MultiEta> {
    let d = mats[0].dim();
    let first = log_values(mats[0].eigenvalues());
    let last = log_values(mats[mats.len() - 1].eigenvalues());
    let values = (1..=d)
        .map(|k| {
            let (sets, x) = grouped_coefficients(mats, k, product_tol)?;
            let mut best = LogValue::ZERO;
            for (i, si) in sets.iter().enumerate() {
                let ai = si.product(&first);
                for (j, sj) in sets.iter().enumerate() {
                    let ak = sj.product(&last);
                    for t in &x[i][j] {
                        if t.value.norm() > minor_tol * t.scale {
                            let prod = ai * t.interior * ak;
                            if prod > best {
                                best = prod;
                            }
                        }
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiEta { values })
}

fn check_multi(mats: &[PsdMatrix]) -> Result<()> {
    if mats.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least two matrices, got {}", mats.len())));
    }
    for m in &mats[1..] {
        check_pair(&mats[0], m)?;
    }
    Ok(())
}

fn ratios(values: &[LogValue]) -> Vec<LogValue> {
    EtaSequence { d: values.len(), values: values.to_vec(), witnesses: vec![None; values.len()] }.limit_eigenvalues()
}

/// Limit eigenvalues of `(A_1^{p/2} ⋯ A_m^p ⋯ A_1^{p/2})^{1/p}`.
///
/// For `m = 2` this is exactly [`limit_eigenvalues`].
pub fn limit_eigenvalues_multi(mats: &[PsdMatrix], minor_tol: f64, product_tol: f64) -> Result<Vec<LogValue>> {
    check_multi(mats)?;
    if mats.len() == 2 {
        return limit_eigenvalues(&mats[0], &mats[1], minor_tol);
    }
    Ok(ratios(&multi_eta(mats, minor_tol, product_tol)?.values))
}

/// The grouped-coefficient path without the `m = 2` shortcut.
#[doc(hidden)]
pub fn limit_eigenvalues_multi_general(mats: &[PsdMatrix], minor_tol: f64, product_tol: f64) -> Result<Vec<LogValue>> {
    check_multi(mats)?;
    Ok(ratios(&multi_eta(mats, minor_tol, product_tol)?.values))
}

/// Limit of the `m`-fold symmetric product.
///
/// Same construction as [`limit_matrix`], with `v_k(I, K)` the grouped
/// coefficient whose chain attains `η_k`. For `m = 2` this is [`limit_matrix`].
pub fn limit_matrix_multi(mats: &[PsdMatrix], tol: &Tolerances) -> Result<LimitReport> {
    check_multi(mats)?;
    if mats.len() == 2 {
        return limit_matrix(&mats[0], &mats[1], tol);
    }
    let d = mats[0].dim();
    let product_tol = tol.product_tol(d);
    let eta = multi_eta(mats, tol.minor_tol, product_tol)?;
    let lambda = ratios(&eta.values);
    let bounds = boundaries(&lambda, product_tol);
    let first = log_values(mats[0].eigenvalues());
    let last = log_values(mats[mats.len() - 1].eigenvalues());
    let spans: Vec<CMatrix> = bounds
        .par_iter()
        .map(|&k| {
            if k == d || eta.values[k - 1].is_zero() {
                return Ok(CMatrix::zeros(d, 0));
            }
            let target = eta.values[k - 1];
            let (sets, x) = grouped_coefficients(mats, k, product_tol)?;
            let mut columns: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
            for (i, si) in sets.iter().enumerate() {
                let ai = si.product(&first);
                for (j, sj) in sets.iter().enumerate() {
                    let ak = sj.product(&last);
                    for t in &x[i][j] {
                        if t.value.norm() > tol.minor_tol * t.scale && within(ai * t.interior * ak, target, product_tol) {
                            columns.entry(j).or_default().push((i, t.value));
                        }
                    }
                }
            }
            span_from_coefficients(d, k, &columns, tol.group_tol)
        })
        .collect::<Result<_>>()?;
    let (z, groups) = assemble(mats[0].eigenvectors(), &lambda, &bounds, spans);
    let lambda1 = lambda.first().map_or(0.0, |l| l.to_real());
    let diagnostics = diagnostics(&z, lambda1, &tol.verify_grid, |p| multi_product_numeric(mats, p))?;
    Ok(LimitReport { limit_eigenvalues: lambda, limit_matrix: z, groups, maximal: None, diagnostics })
}
