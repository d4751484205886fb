//! Hilbert modules over a matrix algebra `B`, presented by generators and a
//! `B`-valued Gram matrix.
//!
//! A module with `n` generators over `B ⊂ M_d` is stored as an `nd × nd`
//! block matrix `G` with `G[i][j] = ⟨e_i, e_j⟩ ∈ B`. A vector
//! `x = Σ e_i x_i` is the `nd × d` block column of its coefficients, so
//! `⟨x, y⟩ = x* G y`, the right action is `x ↦ x b` and an operator given
//! by `a e_j = Σ_i e_i c_ij` is the block matrix `C` acting as `x ↦ C x`.
//!
//! Coefficient representations are not unique when the Gram is singular;
//! equality of vectors and operators is always tested in the Gram-induced
//! seminorm. Closures are no-ops: everything is finite rank.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{membership_tol, verify_positive_map, MapKind, MatrixStarAlgebra, PositiveMap,
    VerificationReport};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, frob, CMat, DEFAULT_TOL, RANK_RTOL};
use crate::random;

/// Left action of an algebra, stored as the operator image of each basis
/// element and extended linearly.
#[derive(Clone, Debug)]
pub struct LeftAction {
    algebra: MatrixStarAlgebra,
    images: Vec<CMat>,
}

impl LeftAction {
    pub fn new(algebra: MatrixStarAlgebra, images: Vec<CMat>) -> Result<Self> {
        if images.len() != algebra.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} action images for an algebra of dimension {}",
                images.len(),
                algebra.len()
            )));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|m| m.shape() != first.shape()) {
                return Err(Error::DimensionMismatch("action images differ in shape".into()));
            }
        }
        Ok(Self { algebra, images })
    }

    pub fn algebra(&self) -> &MatrixStarAlgebra {
        &self.algebra
    }

    pub fn images(&self) -> &[CMat] {
        &self.images
    }

    /// Action matrix of a member of the algebra.
    pub fn matrix(&self, a: &CMat) -> Result<CMat> {
        let coords = self.algebra.coords(a)?;
        Ok(self.matrix_from_coords(&coords))
    }

    /// Like [`LeftAction::matrix`] but projects instead of rejecting; used
    /// for values that lie in the algebra up to rounding.
    pub fn matrix_projected(&self, a: &CMat) -> Result<CMat> {
        let coords = self.algebra.coords_unchecked(a)?;
        Ok(self.matrix_from_coords(&coords))
    }

    pub fn matrix_from_coords(&self, coords: &[Complex64]) -> CMat {
        let shape = self.images[0].shape();
        let mut out = linalg::zeros(shape.0, shape.1);
        for (w, img) in coords.iter().zip(&self.images) {
            if *w != cr(0.0) {
                out += img * *w;
            }
        }
        out
    }

    pub fn operator(&self, a: &CMat) -> Result<AdjointableOperator> {
        Ok(AdjointableOperator::new(self.matrix(a)?))
    }

    fn map_images(&self, f: impl Fn(&CMat) -> CMat) -> LeftAction {
        LeftAction {
            algebra: self.algebra.clone(),
            images: self.images.iter().map(f).collect(),
        }
    }
}

/// Module endomorphism given by its block coefficient matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointableOperator {
    action: CMat,
}

impl AdjointableOperator {
    pub fn new(action: CMat) -> Self {
        Self { action }
    }

    pub fn identity(module: &HilbertModule) -> Self {
        Self::new(module.identity_matrix())
    }

    pub fn zero(module: &HilbertModule) -> Self {
        let n = module.gens * module.block();
        Self::new(linalg::zeros(n, n))
    }

    pub fn action(&self) -> &CMat {
        &self.action
    }

    pub fn into_action(self) -> CMat {
        self.action
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AdjointableOperator) -> Result<AdjointableOperator> {
        if self.action.shape() != other.action.shape() {
            return Err(Error::ModuleMismatch(format!(
                "cannot compose operators of shapes {:?} and {:?}",
                self.action.shape(),
                other.action.shape()
            )));
        }
        Ok(Self::new(&self.action * &other.action))
    }

    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if self.action.ncols() != x.nrows() {
            return Err(Error::ModuleMismatch(format!(
                "operator on {} coefficient rows applied to a vector with {}",
                self.action.ncols(),
                x.nrows()
            )));
        }
        Ok(&self.action * x)
    }

    pub fn add(&self, other: &AdjointableOperator) -> Result<AdjointableOperator> {
        if self.action.shape() != other.action.shape() {
            return Err(Error::ModuleMismatch("operator shapes differ".into()));
        }
        Ok(Self::new(&self.action + &other.action))
    }

    pub fn scale(&self, s: Complex64) -> AdjointableOperator {
        Self::new(&self.action * s)
    }
}

pub fn compose_adjointable(
    a: &AdjointableOperator,
    b: &AdjointableOperator,
) -> Result<AdjointableOperator> {
    a.compose(b)
}

pub fn apply(a: &AdjointableOperator, x: &CMat) -> Result<CMat> {
    a.apply(x)
}

/// Finitely generated Hilbert module over `B`.
#[derive(Clone, Debug)]
pub struct HilbertModule {
    base: MatrixStarAlgebra,
    gens: usize,
    gram: CMat,
    left_action: Option<LeftAction>,
    base_action: Option<LeftAction>,
    distinguished: BTreeMap<String, CMat>,
    gram_pinv: OnceLock<CMat>,
    gram_factor: OnceLock<CMat>,
}

impl HilbertModule {
    /// Module with the given block Gram (`nd × nd`, blocks in `B`).
    pub fn new(base: MatrixStarAlgebra, gram: CMat) -> Result<Self> {
        let d = base.ambient_dim();
        if gram.nrows() != gram.ncols() || !gram.nrows().is_multiple_of(d) {
            return Err(Error::DimensionMismatch(format!(
                "Gram is {}x{}, not a square array of {d}x{d} blocks",
                gram.nrows(),
                gram.ncols()
            )));
        }
        if !linalg::is_finite(&gram) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            gens: gram.nrows() / d,
            base,
            gram,
            left_action: None,
            base_action: None,
            distinguished: BTreeMap::new(),
            gram_pinv: OnceLock::new(),
            gram_factor: OnceLock::new(),
        })
    }

    /// Module from a Gram given entrywise.
    pub fn from_entries(base: MatrixStarAlgebra, entries: &[Vec<CMat>]) -> Result<Self> {
        let d = base.ambient_dim();
        let n = entries.len();
        let mut gram = linalg::zeros(n * d, n * d);
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "Gram row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, b) in row.iter().enumerate() {
                if b.nrows() != d || b.ncols() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "Gram entry ({i},{j}) is {}x{}, expected {d}x{d}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                linalg::set_block(&mut gram, i, j, b);
            }
        }
        Self::new(base, gram)
    }

    /// `B` as a module over itself: one generator with `⟨1,1⟩ = 1`, left
    /// multiplication as the base action and the generator named `1`.
    pub fn base_as_module(base: &MatrixStarAlgebra) -> Self {
        let unit = base.unit().clone();
        let images = base.basis().to_vec();
        let mut m = Self::new(base.clone(), unit.clone()).expect("1x1 Gram");
        m.base_action = Some(LeftAction::new(base.clone(), images).expect("one image per basis element"));
        m.distinguished.insert("1".into(), unit);
        m
    }

    /// `B ⊗ C^k` with `⟨x⊗e_i, y⊗e_j⟩ = δ_ij x*y`, left action on the
    /// `B` factor and the distinguished vector `xi = 1⊗e_1`.
    pub fn free_bimodule(base: &MatrixStarAlgebra, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("free module needs rank >= 1".into()));
        }
        let gram = linalg::block_diag_repeat(base.unit(), rank);
        let images = base
            .basis()
            .iter()
            .map(|b| linalg::block_diag_repeat(b, rank))
            .collect();
        let mut m = Self::new(base.clone(), gram)?;
        m.base_action = Some(LeftAction::new(base.clone(), images)?);
        let xi = m.generator(0);
        m.distinguished.insert("xi".into(), xi);
        Ok(m)
    }

    pub fn with_left_action(mut self, action: LeftAction) -> Result<Self> {
        self.check_action(&action)?;
        self.left_action = Some(action);
        Ok(self)
    }

    pub fn with_base_action(mut self, action: LeftAction) -> Result<Self> {
        self.check_action(&action)?;
        if action.algebra().len() != self.base.len() {
            return Err(Error::DimensionMismatch(
                "base action must be indexed by the base algebra basis".into(),
            ));
        }
        self.base_action = Some(action);
        Ok(self)
    }

    pub fn with_vector(mut self, name: &str, x: CMat) -> Result<Self> {
        self.check_vector(&x)?;
        self.distinguished.insert(name.to_string(), x);
        Ok(self)
    }

    fn check_action(&self, action: &LeftAction) -> Result<()> {
        let n = self.gens * self.block();
        if action.images.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::DimensionMismatch(format!(
                "action images must be {n}x{n}"
            )));
        }
        Ok(())
    }

    fn check_vector(&self, x: &CMat) -> Result<()> {
        let d = self.block();
        if x.nrows() != self.gens * d || x.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "vector is {}x{}, expected {}x{d}",
                x.nrows(),
                x.ncols(),
                self.gens * d
            )));
        }
        Ok(())
    }

    pub fn base(&self) -> &MatrixStarAlgebra {
        &self.base
    }

    /// Number of generators.
    pub fn gens(&self) -> usize {
        self.gens
    }

    /// Block size `d` (ambient size of `B`).
    pub fn block(&self) -> usize {
        self.base.ambient_dim()
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    pub fn gram_entry(&self, i: usize, j: usize) -> CMat {
        linalg::block(&self.gram, i, j, self.block())
    }

    pub fn left_action(&self) -> Option<&LeftAction> {
        self.left_action.as_ref()
    }

    pub fn base_action(&self) -> Option<&LeftAction> {
        self.base_action.as_ref()
    }

    pub fn distinguished(&self) -> &BTreeMap<String, CMat> {
        &self.distinguished
    }

    pub fn vector_named(&self, name: &str) -> Result<&CMat> {
        self.distinguished
            .get(name)
            .ok_or_else(|| Error::MissingVector(name.to_string()))
    }

    pub fn identity_matrix(&self) -> CMat {
        linalg::block_diag_repeat(self.base.unit(), self.gens)
    }

    /// The generator `e_i` (coefficient `1_B` in slot `i`).
    pub fn generator(&self, i: usize) -> CMat {
        let d = self.block();
        let mut x = linalg::zeros(self.gens * d, d);
        x.view_mut((i * d, 0), (d, d)).copy_from(self.base.unit());
        x
    }

    /// Vector `Σ e_i x_i`.
    pub fn vector(&self, coeffs: &[CMat]) -> Result<CMat> {
        let d = self.block();
        if coeffs.len() != self.gens {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} generators",
                coeffs.len(),
                self.gens
            )));
        }
        let mut x = linalg::zeros(self.gens * d, d);
        for (i, b) in coeffs.iter().enumerate() {
            x.view_mut((i * d, 0), (d, d)).copy_from(b);
        }
        Ok(x)
    }

    pub fn coefficient(&self, x: &CMat, i: usize) -> CMat {
        let d = self.block();
        x.view((i * d, 0), (d, d)).into_owned()
    }

    /// `⟨x, y⟩ ∈ B`.
    pub fn inner(&self, x: &CMat, y: &CMat) -> CMat {
        x.adjoint() * &self.gram * y
    }

    /// `F` with `F* F = G`; `‖F x‖_F² = tr ⟨x, x⟩`.
    fn gram_factor(&self) -> &CMat {
        self.gram_factor
            .get_or_init(|| linalg::psd_factor(&self.gram, RANK_RTOL))
    }

    /// Seminorm distance `sqrt tr ⟨x−y, x−y⟩`: zero iff `x = y` in the
    /// module. Evaluated through a factor of the Gram, so rounding is
    /// relative to the vectors rather than squared.
    pub fn vector_distance(&self, x: &CMat, y: &CMat) -> f64 {
        frob(&(self.gram_factor() * (x - y)))
    }

    /// Distance of two operators: the seminorm of `(a − b) e_j` summed in
    /// quadrature over the generators.
    pub fn operator_distance(&self, a: &AdjointableOperator, b: &AdjointableOperator) -> f64 {
        self.matrix_distance(a.action(), b.action())
    }

    pub fn matrix_distance(&self, a: &CMat, b: &CMat) -> f64 {
        frob(&(self.gram_factor() * (a - b)))
    }

    /// Operator of the left action of the base algebra.
    pub fn base_matrix(&self, b: &CMat) -> Result<CMat> {
        self.base_action
            .as_ref()
            .ok_or(Error::MissingAction("the base algebra"))?
            .matrix_projected(b)
    }

    /// Operator of the left action of `a` from the acting algebra.
    pub fn left_operator(&self, a: &CMat) -> Result<AdjointableOperator> {
        self.left_action
            .as_ref()
            .ok_or(Error::MissingAction("an acting algebra"))?
            .operator(a)
    }

    fn gram_pinv(&self) -> &CMat {
        self.gram_pinv
            .get_or_init(|| linalg::psd_pinv(&self.gram, RANK_RTOL))
    }

    /// Adjoint operator `G⁺ C* G`.
    pub fn adjoint(&self, a: &AdjointableOperator) -> AdjointableOperator {
        AdjointableOperator::new(self.gram_pinv() * a.action().adjoint() * &self.gram)
    }

    /// `max ‖⟨a* e_i, e_j⟩ − ⟨e_i, a e_j⟩‖` over generator pairs.
    pub fn adjoint_residual(&self, a: &AdjointableOperator, a_star: &AdjointableOperator) -> f64 {
        let lhs = a_star.action().adjoint() * &self.gram;
        let rhs = &self.gram * a.action();
        max_block_norm(&(lhs - rhs), self.block())
    }

    /// Expanded scalar Gram: `τ(β_α* ⟨e_i, e_j⟩ β_γ)` over generators `i, j`
    /// and base basis elements `α, γ`, `τ` the normalised ambient trace.
    /// Its rank is the complex dimension of the module.
    pub fn scalarized_gram(&self) -> CMat {
        let d = self.block();
        let basis = self.base.basis();
        let k = basis.len();
        let n = self.gens;
        let mut s = linalg::zeros(n * k, n * k);
        let scale = 1.0 / d as f64;
        for i in 0..n {
            for j in 0..n {
                let g = self.gram_entry(i, j);
                for (gamma, bg) in basis.iter().enumerate() {
                    let right = &g * bg;
                    for (alpha, ba) in basis.iter().enumerate() {
                        let v = (ba.adjoint() * &right).trace() * scale;
                        s[(i * k + alpha, j * k + gamma)] = v;
                    }
                }
            }
        }
        s
    }

    /// Complex dimension of the module.
    pub fn scalar_dim(&self) -> usize {
        linalg::psd_factor(&self.scalarized_gram(), RANK_RTOL).nrows()
    }

    /// Numerical invariants: symmetric Gram with entries in `B`, positivity,
    /// action homomorphism and adjointability, unit vectors.
    pub fn verify<R: Rng>(&self, tol: f64, rng: &mut R) -> VerificationReport {
        let mut report = VerificationReport::new();
        let d = self.block();
        report.record(frob(&(&self.gram - self.gram.adjoint())), tol, || {
            "Gram is *-symmetric".into()
        });
        for i in 0..self.gens {
            for j in 0..self.gens {
                let g = self.gram_entry(i, j);
                let r = self.base.project(&g).map_or(f64::INFINITY, |p| p.1);
                report.record(r, tol * frob(&g).max(1.0), || {
                    format!("Gram entry ({i},{j}) lies in B")
                });
            }
        }
        let lambda = linalg::min_eigenvalue(&self.scalarized_gram());
        report.record((-lambda).max(0.0), tol, || {
            format!("scalarized Gram is positive (min eigenvalue {lambda:.3e})")
        });
        for t in 0..8 {
            let coeffs: Vec<CMat> = (0..self.gens)
                .map(|_| random::element(&self.base, rng))
                .collect();
            if let Ok(x) = self.vector(&coeffs) {
                let ip = self.inner(&x, &x);
                let lambda = linalg::min_eigenvalue(&ip);
                report.record((-lambda).max(0.0), tol * frob(&ip).max(1.0), || {
                    format!("random tuple {t}: <x,x> >= 0 (min eigenvalue {lambda:.3e})")
                });
            }
        }
        for (label, action) in [("left", &self.left_action), ("base", &self.base_action)] {
            if let Some(action) = action {
                verify_action(self, label, action, tol, &mut report);
            }
        }
        for name in ["xi", "1"] {
            if let Some(x) = self.distinguished.get(name) {
                let r = frob(&(self.inner(x, x) - self.base.unit()));
                report.record(r, tol, || format!("<{name},{name}> = unit"));
            }
        }
        let _ = d;
        report
    }
}

fn verify_action(
    module: &HilbertModule,
    label: &str,
    action: &LeftAction,
    tol: f64,
    report: &mut VerificationReport,
) {
    let alg = action.algebra();
    let id = module.identity_matrix();
    if let Ok(one) = action.matrix_projected(alg.unit()) {
        let r = module.matrix_distance(&one, &id);
        report.record(r, tol, || format!("{label} action is unital"));
    }
    for (i, a) in alg.basis().iter().enumerate() {
        let ca = &action.images()[i];
        if let Ok(c_star) = action.matrix_projected(&a.adjoint()) {
            let r = module.adjoint_residual(
                &AdjointableOperator::new(ca.clone()),
                &AdjointableOperator::new(c_star),
            );
            report.record(r, tol, || format!("{label} action of b{i}^* is the adjoint"));
        }
        for (j, b) in alg.basis().iter().enumerate() {
            if let Ok(cab) = action.matrix_projected(&(a * b)) {
                let prod = ca * &action.images()[j];
                let r = module.matrix_distance(&cab, &prod);
                report.record(r, tol, || format!("{label} action is multiplicative on (b{i}, b{j})"));
            }
        }
    }
}

pub(crate) fn max_block_norm(m: &CMat, d: usize) -> f64 {
    let rows = m.nrows() / d.max(1);
    let cols = m.ncols() / d.max(1);
    let mut worst = 0.0_f64;
    for i in 0..rows {
        for j in 0..cols {
            worst = worst.max(frob(&linalg::block(m, i, j, d)));
        }
    }
    worst
}

/// Result of removing null directions: the reduced module together with
/// the reduction map from raw coefficients to surviving ones.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub module: HilbertModule,
    /// `m d × n d` block matrix sending raw coefficient columns to
    /// equivalent surviving coefficient columns.
    pub reduction: CMat,
    /// Surviving raw generator indices, in increasing order.
    pub kept: Vec<usize>,
    /// Complex dimension of the module.
    pub scalar_dim: usize,
}

impl Quotient {
    pub fn vector(&self, raw: &CMat) -> CMat {
        &self.reduction * raw
    }

    /// Operator on the quotient induced by a raw operator that preserves
    /// the null space.
    pub fn operator(&self, raw: &CMat) -> CMat {
        let d = self.module.block();
        let mut out = linalg::zeros(self.kept.len() * d, self.kept.len() * d);
        let reduced = &self.reduction * raw;
        for (p, &k) in self.kept.iter().enumerate() {
            // J selects raw generator k with coefficient 1_B.
            let col = reduced.columns(k * d, d) * self.module.base().unit();
            out.columns_mut(p * d, d).copy_from(&col);
        }
        out
    }

    /// Embedding of surviving coefficients as raw coefficients.
    pub fn selection(&self, raw_gens: usize) -> CMat {
        let d = self.module.block();
        let mut j = linalg::zeros(raw_gens * d, self.kept.len() * d);
        for (p, &k) in self.kept.iter().enumerate() {
            linalg::set_block(&mut j, k, p, self.module.base().unit());
        }
        j
    }
}

/// Drop generators that are `B`-linear combinations of earlier choices.
///
/// Generators are chosen greedily by the gain in complex dimension of their
/// `B`-span (largest first, lowest index on ties) until the span is the
/// whole module; the Gram is factored as `F* F` of the expanded scalar Gram
/// with eigenvalues below `1e-10 · λ_max` discarded. Removed generators are
/// re-expressed by least squares in the surviving ones.
pub fn quotient_null_space(raw: &HilbertModule) -> Result<Quotient> {
    let d = raw.block();
    let basis = raw.base().basis();
    let k = basis.len();
    let n = raw.gens();
    let s = raw.scalarized_gram();
    let (values, _) = linalg::hermitian_eigen(&s);
    let top = values.iter().fold(0.0_f64, |a, v| a.max(*v));
    let f = linalg::psd_factor(&s, RANK_RTOL);
    let r = f.nrows();
    let threshold = (RANK_RTOL * top).sqrt();
    let unit_coords = raw.base().coords_unchecked(raw.base().unit())?;
    let unit_vec = CMat::from_column_slice(k, 1, &unit_coords);

    let mut selected: Vec<usize> = Vec::new();
    let mut q = linalg::zeros(r, 0);
    let mut span = 0;
    while span < r {
        let mut best: Option<(usize, usize, CMat)> = None;
        for i in (0..n).filter(|i| !selected.contains(i)) {
            let fi = f.columns(i * k, k).into_owned();
            let res = if q.ncols() > 0 {
                &fi - &q * (q.adjoint() * &fi)
            } else {
                fi
            };
            let gain = linalg::rank_rel(&res, threshold, 1.0);
            if gain > best.as_ref().map_or(0, |b| b.1) {
                best = Some((i, gain, res));
            }
        }
        let Some((i, _, res)) = best else { break };
        let extra = linalg::range_basis(&res, threshold);
        let mut grown = linalg::zeros(r, q.ncols() + extra.ncols());
        grown.columns_mut(0, q.ncols()).copy_from(&q);
        grown.columns_mut(q.ncols(), extra.ncols()).copy_from(&extra);
        q = grown;
        span = q.ncols();
        selected.push(i);
    }
    selected.sort_unstable();

    let m = selected.len();
    let mut reduction = linalg::zeros(m * d, n * d);
    let mut fs = linalg::zeros(r, m * k);
    for (p, &i) in selected.iter().enumerate() {
        fs.columns_mut(p * k, k).copy_from(&f.columns(i * k, k));
        linalg::set_block(&mut reduction, p, i, raw.base().unit());
    }
    // Normal equations on the exact scalar Gram when the kept block is
    // well conditioned; least squares on the factor otherwise.
    let sel_rows: Vec<usize> = selected.iter().flat_map(|&i| (i * k)..(i * k + k)).collect();
    let ss = s.select_rows(&sel_rows).select_columns(&sel_rows);
    let (ss_values, _) = linalg::hermitian_eigen(&ss);
    let ss_top = ss_values.iter().fold(0.0_f64, |a, v| a.max(*v));
    let ss_bottom = ss_values.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    let normal = (ss_bottom > 1e-6 * ss_top).then(|| ss.clone().lu());
    for kk in (0..n).filter(|i| !selected.contains(i)) {
        let sol = match &normal {
            Some(ch) => {
                let rhs = s.select_rows(&sel_rows).columns(kk * k, k) * &unit_vec;
                ch.solve(&rhs).expect("well-conditioned block is invertible")
            }
            None => linalg::lstsq(&fs, &(f.columns(kk * k, k) * &unit_vec), RANK_RTOL),
        };
        for p in 0..m {
            let coeff = raw.base().element(&sol.as_slice()[p * k..(p + 1) * k]);
            linalg::set_block(&mut reduction, p, kk, &coeff);
        }
    }

    let mut gram = linalg::zeros(m * d, m * d);
    for (p, &i) in selected.iter().enumerate() {
        for (p2, &j) in selected.iter().enumerate() {
            linalg::set_block(&mut gram, p, p2, &raw.gram_entry(i, j));
        }
    }
    let module = HilbertModule::new(raw.base().clone(), gram)?;
    let mut quotient = Quotient {
        module,
        reduction,
        kept: selected,
        scalar_dim: r,
    };
    let left = raw
        .left_action
        .as_ref()
        .map(|a| a.map_images(|c| quotient.operator(c)));
    let base = raw
        .base_action
        .as_ref()
        .map(|a| a.map_images(|c| quotient.operator(c)));
    let vectors: BTreeMap<String, CMat> = raw
        .distinguished
        .iter()
        .map(|(name, x)| (name.clone(), quotient.vector(x)))
        .collect();
    quotient.module.left_action = left;
    quotient.module.base_action = base;
    quotient.module.distinguished = vectors;
    Ok(quotient)
}

/// GNS module of a unital CP map, conditional expectation or state
/// `Φ: A → B`: generated by `a ⊗ ξ` with `⟨a⊗ξ, a'⊗ξ⟩ = Φ(a* a')`, left
/// action `a'(a⊗ξ) = a'a⊗ξ` and cyclic vector `xi` with `⟨ξ, aξ⟩ = Φ(a)`.
///
/// The base action (left action of `B`) is taken from the `A`-action when
/// `B ⊂ A`, and is trivial when `B = C`.
pub fn gns_construct(map: &PositiveMap) -> Result<HilbertModule> {
    gns_construct_with_base(map, None)
}

/// As [`gns_construct`], with the left action of `B` given by the images in
/// `A` of the `B` basis elements.
pub fn gns_construct_with_base(
    map: &PositiveMap,
    base_in_domain: Option<&[CMat]>,
) -> Result<HilbertModule> {
    let scale = frob(map.matrix()).max(1.0);
    let report = verify_positive_map(map, DEFAULT_TOL * scale)?;
    if !report.passed {
        let detail = report
            .failures
            .first()
            .map(|f| f.identity.clone())
            .unwrap_or_default();
        return Err(Error::UnverifiedMap {
            kind: map.kind(),
            residual: report.worst_residual,
            detail,
        });
    }
    if map.kind() == MapKind::CpMap {
        let r = map.unital_residual();
        if r > DEFAULT_TOL * scale {
            return Err(Error::NonUnital { residual: r });
        }
    }
    let a_alg = map.domain();
    let b_alg = map.codomain();
    let d = b_alg.ambient_dim();
    let unit_b = b_alg.unit();
    let mut symbols: Vec<CMat> = vec![a_alg.unit().clone()];
    symbols.extend(a_alg.basis().iter().cloned());
    let n = symbols.len();
    let mut gram = linalg::zeros(n * d, n * d);
    for (s, x) in symbols.iter().enumerate() {
        for (t, y) in symbols.iter().enumerate() {
            let v = map.apply(&(x.adjoint() * y))?;
            linalg::set_block(&mut gram, s, t, &v);
        }
    }
    let mut images = Vec::with_capacity(a_alg.len());
    for a in a_alg.basis() {
        let mut c = linalg::zeros(n * d, n * d);
        for (t, s) in symbols.iter().enumerate() {
            let coords = a_alg.coords(&(a * s))?;
            for (alpha, w) in coords.iter().enumerate() {
                if *w != cr(0.0) {
                    linalg::set_block(&mut c, alpha + 1, t, &(unit_b * *w));
                }
            }
        }
        images.push(c);
    }
    let left = LeftAction::new(a_alg.clone(), images)?;
    let base_images: Option<Vec<CMat>> = if let Some(in_a) = base_in_domain {
        if in_a.len() != b_alg.len() {
            return Err(Error::DimensionMismatch(
                "one domain image per base basis element required".into(),
            ));
        }
        Some(in_a.iter().map(|b| left.matrix(b)).collect::<Result<_>>()?)
    } else if b_alg.is_scalars() {
        Some(vec![linalg::block_diag_repeat(unit_b, n)])
    } else if b_alg.ambient_dim() == a_alg.ambient_dim()
        && b_alg
            .basis()
            .iter()
            .all(|b| a_alg.contains(b, membership_tol(b)))
    {
        Some(b_alg.basis().iter().map(|b| left.matrix(b)).collect::<Result<_>>()?)
    } else {
        None
    };
    let mut raw = HilbertModule::new(b_alg.clone(), gram)?.with_left_action(left)?;
    if let Some(images) = base_images {
        raw = raw.with_base_action(LeftAction::new(b_alg.clone(), images)?)?;
    }
    let xi = raw.generator(0);
    raw = raw.with_vector("xi", xi)?;
    let quotient = quotient_null_space(&raw)?;
    if quotient.module.gens() == 0 {
        return Err(Error::ZeroModule);
    }
    Ok(quotient.module)
}

/// Module tensor product `E1 ⊙ E2` over `B` after removal of null
/// directions. Keeps both factors to build vectors and operators.
#[derive(Clone, Debug)]
pub struct ModuleTensor {
    left: HilbertModule,
    right: HilbertModule,
    quotient: Quotient,
}

fn check_same_base(e1: &HilbertModule, e2: &HilbertModule) -> Result<()> {
    let b1 = e1.base();
    let b2 = e2.base();
    let same = b1.ambient_dim() == b2.ambient_dim()
        && b1.len() == b2.len()
        && b1
            .basis()
            .iter()
            .zip(b2.basis())
            .all(|(x, y)| frob(&(x - y)) <= DEFAULT_TOL);
    if !same {
        return Err(Error::ModuleMismatch(
            "modules are over different base algebras".into(),
        ));
    }
    Ok(())
}

/// Super-block matrix whose `(i, k)` super-block is `f(i, k)`, each of size
/// `inner × inner`.
fn super_blocks(outer_rows: usize, outer_cols: usize, inner: usize, f: impl Fn(usize, usize) -> CMat) -> CMat {
    let mut m = linalg::zeros(outer_rows * inner, outer_cols * inner);
    for i in 0..outer_rows {
        for k in 0..outer_cols {
            let blk = f(i, k);
            if blk.iter().any(|z| *z != cr(0.0)) {
                m.view_mut((i * inner, k * inner), (inner, inner)).copy_from(&blk);
            }
        }
    }
    m
}

/// Raw (unreduced) tensor product with generators `(i, j) ↦ i·n2 + j` and
/// `⟨e_i⊙f_j, e_i'⊙f_j'⟩ = ⟨f_j, ⟨e_i, e_i'⟩ f_j'⟩`.
pub fn tensor_raw(e1: &HilbertModule, e2: &HilbertModule) -> Result<HilbertModule> {
    check_same_base(e1, e2)?;
    let d = e1.block();
    let n1 = e1.gens();
    let n2 = e2.gens();
    let inner = n2 * d;
    let mut lifted: Vec<Vec<CMat>> = Vec::with_capacity(n1);
    for i in 0..n1 {
        let mut row = Vec::with_capacity(n1);
        for ip in 0..n1 {
            row.push(e2.base_matrix(&e1.gram_entry(i, ip))?);
        }
        lifted.push(row);
    }
    let g2 = e2.gram();
    let gram = super_blocks(n1, n1, inner, |i, ip| g2 * &lifted[i][ip]);
    let mut raw = HilbertModule::new(e1.base().clone(), gram)?;
    if let Some(action) = e1.left_action() {
        let images = action
            .images()
            .iter()
            .map(|c| lift_left(e1, e2, c))
            .collect::<Result<Vec<_>>>()?;
        raw.left_action = Some(LeftAction::new(action.algebra().clone(), images)?);
    }
    if let Some(action) = e1.base_action() {
        let images = action
            .images()
            .iter()
            .map(|c| lift_left(e1, e2, c))
            .collect::<Result<Vec<_>>>()?;
        raw.base_action = Some(LeftAction::new(action.algebra().clone(), images)?);
    }
    for (name, x1) in e1.distinguished() {
        if let Some(x2) = e2.distinguished().get(name) {
            let v = raw_vector(e1, e2, x1, x2)?;
            raw.distinguished.insert(name.clone(), v);
        }
    }
    Ok(raw)
}

/// Raw matrix of `a ⊙ id` for an operator `a` on the left factor.
fn lift_left(e1: &HilbertModule, e2: &HilbertModule, c1: &CMat) -> Result<CMat> {
    let d = e1.block();
    let n1 = e1.gens();
    let mut blocks = Vec::with_capacity(n1 * n1);
    for i in 0..n1 {
        for k in 0..n1 {
            blocks.push(e2.base_matrix(&linalg::block(c1, i, k, d))?);
        }
    }
    Ok(super_blocks(n1, n1, e2.gens() * d, |i, k| blocks[i * n1 + k].clone()))
}

/// Raw coefficients of `x1 ⊙ x2`.
fn raw_vector(e1: &HilbertModule, e2: &HilbertModule, x1: &CMat, x2: &CMat) -> Result<CMat> {
    let d = e1.block();
    let n1 = e1.gens();
    let inner = e2.gens() * d;
    let mut out = linalg::zeros(n1 * inner, d);
    for i in 0..n1 {
        let coeff = e1.coefficient(x1, i);
        let part = e2.base_matrix(&coeff)? * x2;
        out.view_mut((i * inner, 0), (inner, d)).copy_from(&part);
    }
    Ok(out)
}

/// `E1 ⊙ E2` over `B`. `E2` must carry a left action of `B`.
pub fn tensor_over_b(e1: &HilbertModule, e2: &HilbertModule) -> Result<ModuleTensor> {
    let raw = tensor_raw(e1, e2)?;
    let quotient = quotient_null_space(&raw)?;
    Ok(ModuleTensor {
        left: e1.clone(),
        right: e2.clone(),
        quotient,
    })
}

impl ModuleTensor {
    pub fn module(&self) -> &HilbertModule {
        &self.quotient.module
    }

    pub fn into_module(self) -> HilbertModule {
        self.quotient.module
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }

    pub fn left(&self) -> &HilbertModule {
        &self.left
    }

    pub fn right(&self) -> &HilbertModule {
        &self.right
    }

    /// `x1 ⊙ x2` in the reduced module.
    pub fn vector(&self, x1: &CMat, x2: &CMat) -> Result<CMat> {
        Ok(self.quotient.vector(&raw_vector(&self.left, &self.right, x1, x2)?))
    }

    /// `a ⊙ id` for an operator on the left factor.
    pub fn left_operator(&self, a: &AdjointableOperator) -> Result<AdjointableOperator> {
        let raw = lift_left(&self.left, &self.right, a.action())?;
        Ok(AdjointableOperator::new(self.quotient.operator(&raw)))
    }

    /// `a1 ⊙ a2`; `a2` must commute with the left action of `B`.
    pub fn tensor_operators(
        &self,
        a1: &AdjointableOperator,
        a2: &AdjointableOperator,
    ) -> Result<AdjointableOperator> {
        let e2 = &self.right;
        let mut worst = 0.0_f64;
        for b in e2.base().basis() {
            let lb = e2.base_matrix(b)?;
            let comm = &lb * a2.action() - a2.action() * &lb;
            worst = worst.max(e2.matrix_distance(&comm, &linalg::zeros(comm.nrows(), comm.ncols())));
        }
        let scale = frob(a2.action()).max(1.0);
        if worst > DEFAULT_TOL * scale {
            return Err(Error::NotBimoduleMap { residual: worst });
        }
        let d = self.left.block();
        let n1 = self.left.gens();
        let mut blocks = Vec::with_capacity(n1 * n1);
        for i in 0..n1 {
            for k in 0..n1 {
                let c = linalg::block(a1.action(), i, k, d);
                blocks.push(e2.base_matrix(&c)? * a2.action());
            }
        }
        let raw = super_blocks(n1, n1, e2.gens() * d, |i, k| blocks[i * n1 + k].clone());
        Ok(AdjointableOperator::new(self.quotient.operator(&raw)))
    }

    /// `id ⊙ a2`; `a2` must commute with the left action of `B`.
    pub fn right_operator(&self, a2: &AdjointableOperator) -> Result<AdjointableOperator> {
        self.tensor_operators(&AdjointableOperator::identity(&self.left), a2)
    }

    /// `(ξ⊙id) a2 (ξ*⊙id)`: `x1 ⊙ x2 ↦ ξ ⊙ a2 ⟨ξ, x1⟩ x2`.
    pub fn unit_sandwich(&self, xi: &CMat, a2: &AdjointableOperator) -> Result<AdjointableOperator> {
        let e1 = &self.left;
        let e2 = &self.right;
        let d = e1.block();
        let n1 = e1.gens();
        let xi_g = xi.adjoint() * e1.gram();
        let mut outs = Vec::with_capacity(n1);
        let mut ins = Vec::with_capacity(n1);
        for i in 0..n1 {
            outs.push(e2.base_matrix(&e1.coefficient(xi, i))?);
            let ip = xi_g.columns(i * d, d).into_owned();
            ins.push(a2.action() * e2.base_matrix(&ip)?);
        }
        let raw = super_blocks(n1, n1, e2.gens() * d, |ip, i| &outs[ip] * &ins[i]);
        Ok(AdjointableOperator::new(self.quotient.operator(&raw)))
    }
}

/// `max_a ‖⟨ξ, a ξ⟩ − map(a)‖` over the domain basis for the GNS module of
/// `map`.
pub fn gns_residual(map: &PositiveMap, module: &HilbertModule) -> Result<f64> {
    let xi = module.vector_named("xi")?;
    let mut worst = 0.0_f64;
    for a in map.domain().basis() {
        let ax = module.left_operator(a)?.apply(xi)?;
        worst = worst.max(frob(&(module.inner(xi, &ax) - map.apply(a)?)));
    }
    Ok(worst)
}

/// Largest block distance between the Grams of `(E1 ⊙ E2) ⊙ E3` and
/// `E1 ⊙ (E2 ⊙ E3)` on the common raw generators `e_i ⊙ e_j ⊙ e_k`.
pub fn associativity_residual(e1: &HilbertModule, e2: &HilbertModule, e3: &HilbertModule) -> Result<f64> {
    let left = tensor_raw(&tensor_raw(e1, e2)?, e3)?;
    let right = tensor_raw(e1, &tensor_raw(e2, e3)?)?;
    Ok(max_block_norm(&(left.gram() - right.gram()), e1.block()))
}

/// Rank-one operator `z ↦ x ⟨y, z⟩`.
pub fn rank_one(module: &HilbertModule, x: &CMat, y: &CMat) -> AdjointableOperator {
    AdjointableOperator::new(x * y.adjoint() * module.gram())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real_rows, matrix_unit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_space(gram: CMat) -> HilbertModule {
        let base = MatrixStarAlgebra::scalars();
        let images = vec![linalg::identity(gram.nrows())];
        HilbertModule::new(base.clone(), gram)
            .unwrap()
            .with_base_action(LeftAction::new(base, images).unwrap())
            .unwrap()
    }

    #[test]
    fn gns_of_identity_is_trivial() {
        for b in [MatrixStarAlgebra::full(2), MatrixStarAlgebra::diagonal(3)] {
            let id = PositiveMap::identity(b.clone(), MapKind::CpMap).unwrap();
            let e = gns_construct(&id).unwrap();
            assert_eq!(e.gens(), 1);
            assert_eq!(e.gram_entry(0, 0), *b.unit());
            assert_eq!(*e.vector_named("xi").unwrap(), e.generator(0));
        }
    }

    #[test]
    fn gns_of_trace_is_l2() {
        let tr = PositiveMap::normalized_trace(MatrixStarAlgebra::full(2)).unwrap();
        let e = gns_construct(&tr).unwrap();
        assert_eq!(e.gens(), 4);
        assert_eq!(e.scalar_dim(), 4);
        // the Gram of the four matrix units under the normalised trace is
        // I/2 up to the choice of surviving generators
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(e.verify(1e-9, &mut rng).passed);
    }

    #[test]
    fn gns_reproduces_map() {
        let m2 = MatrixStarAlgebra::full(2);
        let u = from_real_rows(&[&[0.6, -0.8], &[0.8, 0.6]]);
        let t = PositiveMap::from_kraus(
            m2.clone(),
            &[linalg::identity(2) * cr(0.5f64.sqrt()), &u * cr(0.5f64.sqrt())],
        )
        .unwrap();
        let e = gns_construct(&t).unwrap();
        let xi = e.vector_named("xi").unwrap();
        for b in m2.basis() {
            let lhs = e.inner(xi, &e.left_operator(b).unwrap().apply(xi).unwrap());
            assert!(frob(&(lhs - t.apply(b).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn gns_rejects_non_cp() {
        let m2 = MatrixStarAlgebra::full(2);
        let t = PositiveMap::from_fn(m2.clone(), m2, MapKind::CpMap, |x| x.transpose()).unwrap();
        assert!(matches!(gns_construct(&t), Err(Error::UnverifiedMap { .. })));
    }

    #[test]
    fn quotient_keeps_nondegenerate_gram() {
        let m = scalar_space(diag_real(&[1.0, 2.0]));
        let q = quotient_null_space(&m).unwrap();
        assert_eq!(q.kept, vec![0, 1]);
        assert_eq!(q.module.gram(), m.gram());
    }

    #[test]
    fn quotient_drops_duplicate_generator() {
        let m = scalar_space(from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]));
        let x = m.generator(1);
        let m = m.with_vector("v", x).unwrap();
        let q = quotient_null_space(&m).unwrap();
        assert_eq!(q.module.gens(), 1);
        // the dropped generator is re-expressed as the surviving one
        let v = q.module.vector_named("v").unwrap();
        assert!((v[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_detects_b_linear_dependence() {
        // Over the diagonal algebra, e2 = e1·b is B-dependent on e1 but the
        // two are not scalar multiples of each other.
        let base = MatrixStarAlgebra::diagonal(2);
        let b = diag_real(&[2.0, 3.0]);
        let one = linalg::identity(2);
        let m = HilbertModule::from_entries(
            base,
            &[vec![one.clone(), b.clone()], vec![b.clone(), &b * &b]],
        )
        .unwrap();
        let q = quotient_null_space(&m).unwrap();
        assert_eq!(q.module.gens(), 1);
        let e2 = q.vector(&m.generator(1));
        assert!(q.module.vector_distance(&e2, &(q.module.generator(0) * &b)) < 1e-12);
    }

    #[test]
    fn scalar_tensor_is_kronecker() {
        let g1 = from_real_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let g2 = from_real_rows(&[&[1.0, 0.0, 0.2], &[0.0, 3.0, 0.0], &[0.2, 0.0, 1.0]]);
        let t = tensor_over_b(&scalar_space(g1.clone()), &scalar_space(g2.clone())).unwrap();
        assert_eq!(t.module().gens(), 6);
        assert!(frob(&(t.module().gram() - linalg::kron(&g1, &g2))) < 1e-14);
    }

    #[test]
    fn base_is_unit_for_tensor() {
        let base = MatrixStarAlgebra::full(2);
        let b = HilbertModule::base_as_module(&base);
        let t = tensor_over_b(&b, &b).unwrap();
        assert_eq!(t.module().gens(), 1);
        assert_eq!(t.module().gram_entry(0, 0), linalg::identity(2));
        let one = b.vector_named("1").unwrap();
        let v = t.vector(one, one).unwrap();
        assert!(t.module().vector_distance(&v, t.module().vector_named("1").unwrap()) < 1e-14);
    }

    #[test]
    fn amalgamation_identifies_base_elements() {
        // E1 presented with generators {1, b} over the diagonal algebra:
        // (1·b)⊙1 and 1⊙(b·1) coincide, so one generator survives.
        let base = MatrixStarAlgebra::diagonal(2);
        let b = diag_real(&[2.0, 3.0]);
        let one = linalg::identity(2);
        let e1 = HilbertModule::from_entries(
            base.clone(),
            &[vec![one.clone(), b.clone()], vec![b.clone(), &b * &b]],
        )
        .unwrap();
        let e2 = HilbertModule::base_as_module(&base);
        let raw = tensor_raw(&e1, &e2).unwrap();
        assert_eq!(raw.gens(), 2);
        let x = raw.generator(1);
        let y = raw.generator(0) * &b;
        assert!(raw.vector_distance(&x, &y) < 1e-14);
        let t = tensor_over_b(&e1, &e2).unwrap();
        assert_eq!(t.module().gens(), 1);
    }

    #[test]
    fn rank_one_projection_is_idempotent() {
        let tr = PositiveMap::normalized_trace(MatrixStarAlgebra::full(2)).unwrap();
        let e = gns_construct(&tr).unwrap();
        let xi = e.vector_named("xi").unwrap().clone();
        let p = rank_one(&e, &xi, &xi);
        let pp = p.compose(&p).unwrap();
        assert!(e.operator_distance(&pp, &p) < 1e-13);
        assert!(e.vector_distance(&p.apply(&xi).unwrap(), &xi) < 1e-13);
        let pstar = e.adjoint(&p);
        assert!(e.operator_distance(&pstar, &p) < 1e-12);
    }

    #[test]
    fn scalar_rank_one_is_ket_bra() {
        let e = scalar_space(linalg::identity(2));
        let one = e.generator(0);
        let p = rank_one(&e, &one, &one);
        assert_eq!(*p.action(), matrix_unit(2, 0, 0));
    }

    #[test]
    fn module_mismatch_detected() {
        let a = AdjointableOperator::new(linalg::identity(2));
        let b = AdjointableOperator::new(linalg::identity(3));
        assert!(matches!(a.compose(&b), Err(Error::ModuleMismatch(_))));
        let e1 = HilbertModule::base_as_module(&MatrixStarAlgebra::diagonal(2));
        let e2 = HilbertModule::base_as_module(&MatrixStarAlgebra::full(2));
        assert!(matches!(tensor_over_b(&e1, &e2), Err(Error::ModuleMismatch(_))));
    }

    #[test]
    fn free_bimodule_is_white_noise_fiber() {
        let base = MatrixStarAlgebra::full(2);
        let e = HilbertModule::free_bimodule(&base, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(e.verify(1e-9, &mut rng).passed);
        let xi = e.vector_named("xi").unwrap();
        for b in base.basis() {
            let v = e.inner(xi, &(e.base_matrix(b).unwrap() * xi));
            assert!(frob(&(v - b)) < 1e-15);
        }
    }
}
