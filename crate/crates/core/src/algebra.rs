//! Finite-dimensional *-algebras of complex matrices and the positive maps
//! between them (states, conditional expectations, CP maps).
//!
//! An algebra is the linear span of a basis of `d × d` matrices. Closure
//! under products and adjoints is not assumed at construction time; it is
//! checked by [`verify_algebra`]. Positivity of maps is reduced to
//! eigenvalue checks: a state through its density matrix inside the
//! algebra, a CP map through the Choi matrix of its extension to the
//! ambient matrix algebra.

use std::fmt;

use nalgebra::SVD;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, cr, frob, CMat, DEFAULT_TOL, RANK_RTOL};

/// Outcome of a numerical verification.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub passed: bool,
    pub worst_residual: f64,
    pub checked: usize,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub identity: String,
    pub residual: f64,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self {
            passed: true,
            ..Self::default()
        }
    }

    /// Record one identity; `residual > tol` marks it failed.
    pub fn record(&mut self, residual: f64, tol: f64, identity: impl FnOnce() -> String) {
        self.checked += 1;
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        self.worst_residual = self.worst_residual.max(residual);
        if residual > tol {
            self.passed = false;
            self.failures.push(Failure {
                identity: identity(),
                residual,
            });
        }
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.passed &= other.passed;
        self.worst_residual = self.worst_residual.max(other.worst_residual);
        self.checked += other.checked;
        self.failures.extend(other.failures);
    }
}

/// A linear span of `d × d` complex matrices with a designated unit.
#[derive(Clone, Debug)]
pub struct MatrixStarAlgebra {
    dim: usize,
    basis: Vec<CMat>,
    unit: CMat,
    pinv: CMat,
}

impl MatrixStarAlgebra {
    /// Build from a linearly independent basis. `unit` defaults to the
    /// ambient identity.
    pub fn new(basis: Vec<CMat>, unit: Option<CMat>) -> Result<Self> {
        let first = basis.first().ok_or(Error::EmptyBasis)?;
        let dim = first.nrows();
        for (i, b) in basis.iter().enumerate() {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "basis element {i} is {}x{}, expected {dim}x{dim}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if !linalg::is_finite(b) {
                return Err(Error::NonFinite);
            }
        }
        let unit = unit.unwrap_or_else(|| linalg::identity(dim));
        if unit.nrows() != dim || unit.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "unit is {}x{}, expected {dim}x{dim}",
                unit.nrows(),
                unit.ncols()
            )));
        }
        if !linalg::is_finite(&unit) {
            return Err(Error::NonFinite);
        }
        let stacked = stack(&basis, dim);
        let svd = SVD::new(stacked.clone(), true, true);
        let top = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > RANK_RTOL * top)
            .count();
        if rank < basis.len() {
            return Err(Error::LinearlyDependent {
                rank,
                len: basis.len(),
            });
        }
        let bottom = svd.singular_values.iter().fold(f64::INFINITY, |a, s| a.min(*s));
        // Normal equations are exact for orthogonal bases (matrix units,
        // Pauli matrices); the SVD route covers ill-conditioned ones.
        let normal = (stacked.adjoint() * &stacked).cholesky();
        let pinv = match normal {
            Some(ch) if top / bottom < 1e4 => ch.inverse() * stacked.adjoint(),
            _ => svd
                .pseudo_inverse(0.0)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        };
        Ok(Self {
            dim,
            basis,
            unit,
            pinv,
        })
    }

    /// Build from a spanning set, keeping a maximal independent subset in
    /// order.
    pub fn from_spanning_set(set: Vec<CMat>, unit: Option<CMat>) -> Result<Self> {
        let first = set.first().ok_or(Error::EmptyBasis)?;
        let dim = first.nrows();
        let mut kept: Vec<CMat> = Vec::new();
        let scale = set.iter().map(frob).fold(0.0_f64, f64::max);
        for m in set {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "spanning element is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let mut trial = kept.clone();
            trial.push(m);
            let rank = linalg::rank_rel(&stack(&trial, dim), scale, RANK_RTOL);
            if rank == trial.len() {
                kept = trial;
            }
        }
        Self::new(kept, unit)
    }

    /// Full matrix algebra `M_d` with the matrix-unit basis, row-major.
    pub fn full(d: usize) -> Self {
        let basis = (0..d)
            .flat_map(|i| (0..d).map(move |j| linalg::matrix_unit(d, i, j)))
            .collect();
        Self::new(basis, None).expect("matrix units are independent")
    }

    /// `M_2` with the Pauli basis `{I, σx, σy, σz}`.
    pub fn pauli() -> Self {
        Self::new(pauli_basis().to_vec(), None).expect("Pauli matrices are independent")
    }

    /// Diagonal matrices in `M_d`: functions on `d` points.
    pub fn diagonal(d: usize) -> Self {
        let basis = (0..d).map(|i| linalg::matrix_unit(d, i, i)).collect();
        Self::new(basis, None).expect("diagonal units are independent")
    }

    /// The one-dimensional algebra `C` (as `1 × 1` matrices).
    pub fn scalars() -> Self {
        Self::new(vec![linalg::identity(1)], None).expect("scalar unit")
    }

    /// The unital *-algebra generated by `gens` inside `M_d`.
    pub fn generated_by(d: usize, gens: &[CMat]) -> Result<Self> {
        let mut set = vec![linalg::identity(d)];
        for g in gens {
            set.push(g.clone());
            set.push(g.adjoint());
        }
        let mut alg = Self::from_spanning_set(set, None)?;
        loop {
            let mut set = alg.basis.clone();
            for a in &alg.basis {
                for b in &alg.basis {
                    set.push(a * b);
                }
            }
            let next = Self::from_spanning_set(set, None)?;
            if next.len() == alg.len() {
                return Ok(alg);
            }
            alg = next;
        }
    }

    /// Ambient matrix size `d`.
    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the algebra as a vector space.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn unit(&self) -> &CMat {
        &self.unit
    }

    pub fn is_scalars(&self) -> bool {
        self.dim == 1
    }

    fn check_dim(&self, x: &CMat) -> Result<()> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, algebra lives in M_{}",
                x.nrows(),
                x.ncols(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Least-squares coordinates of `x` in the basis (no membership check).
    pub fn coords_unchecked(&self, x: &CMat) -> Result<Vec<Complex64>> {
        self.check_dim(x)?;
        let v = CMat::from_column_slice(self.dim * self.dim, 1, x.as_slice());
        let coef = &self.pinv * v;
        Ok(coef.iter().copied().collect())
    }

    /// Coordinates of a member of the algebra; rejects non-members.
    pub fn coords(&self, x: &CMat) -> Result<Vec<Complex64>> {
        let (_, residual) = self.project(x)?;
        if residual > membership_tol(x) {
            return Err(Error::NotInAlgebra { residual });
        }
        self.coords_unchecked(x)
    }

    /// Orthogonal (Frobenius) projection onto the span, with residual norm.
    pub fn project(&self, x: &CMat) -> Result<(CMat, f64)> {
        let coef = self.coords_unchecked(x)?;
        let p = self.element(&coef);
        let residual = frob(&(x - &p));
        Ok((p, residual))
    }

    pub fn contains(&self, x: &CMat, tol: f64) -> bool {
        self.project(x).map(|(_, r)| r <= tol).unwrap_or(false)
    }

    /// Linear combination of basis elements.
    pub fn element(&self, coords: &[Complex64]) -> CMat {
        let mut m = linalg::zeros(self.dim, self.dim);
        for (a, b) in coords.iter().zip(&self.basis) {
            if *a != Complex64::new(0.0, 0.0) {
                m += b * *a;
            }
        }
        m
    }

    /// Largest commutator `‖b_i b_j − b_j b_i‖` over basis pairs.
    pub fn commutator_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in &self.basis {
            for b in &self.basis {
                worst = worst.max(frob(&(a * b - b * a)));
            }
        }
        worst
    }

    /// Minimal projections of a commutative algebra, ordered by first
    /// support index.
    pub fn atoms(&self, tol: f64) -> Result<Vec<CMat>> {
        let residual = self.commutator_residual();
        if residual > tol {
            return Err(Error::NonCommutative { residual });
        }
        // A generic self-adjoint element separates the atoms by its eigenvalues.
        let mut h = linalg::zeros(self.dim, self.dim);
        for (k, b) in self.basis.iter().enumerate() {
            let w = 1.0 + 0.618_033_988_749_894_8 * (k as f64 + 1.0).sqrt() + 0.1 * k as f64;
            h += (b + b.adjoint()) * cr(w);
        }
        let (values, vectors) = linalg::hermitian_eigen(&h);
        let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let mut atoms: Vec<CMat> = Vec::new();
        let mut start = 0;
        while start < values.len() {
            let mut end = start + 1;
            while end < values.len() && (values[end] - values[start]).abs() <= 1e-8 * scale {
                end += 1;
            }
            let v = vectors.columns(start, end - start);
            let p = v * v.adjoint();
            if frob(&(&p * &self.unit - &p)) < 1e-8 {
                atoms.push(p);
            }
            start = end;
        }
        let mut out = Vec::new();
        for p in atoms {
            let (proj, r) = self.project(&p)?;
            if r > 1e-7 {
                return Err(Error::InvalidArgument(format!(
                    "spectral projection escapes the algebra (residual {r:.3e})"
                )));
            }
            out.push(proj);
        }
        if out.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "found {} atoms for an algebra of dimension {}",
                out.len(),
                self.len()
            )));
        }
        out.sort_by_key(|p| {
            (0..self.dim)
                .find(|&i| p[(i, i)].re > 1e-9)
                .unwrap_or(self.dim)
        });
        Ok(out)
    }
}

fn stack(basis: &[CMat], dim: usize) -> CMat {
    let mut m = linalg::zeros(dim * dim, basis.len());
    for (k, b) in basis.iter().enumerate() {
        m.column_mut(k).copy_from_slice(b.as_slice());
    }
    m
}

pub(crate) fn membership_tol(x: &CMat) -> f64 {
    DEFAULT_TOL * frob(x).max(1.0)
}

pub fn pauli_basis() -> [CMat; 4] {
    let i = linalg::identity(2);
    let sx = linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let mut sy = linalg::zeros(2, 2);
    sy[(0, 1)] = c(0.0, -1.0);
    sy[(1, 0)] = c(0.0, 1.0);
    let sz = linalg::diag_real(&[1.0, -1.0]);
    [i, sx, sy, sz]
}

/// Check closure under products and adjoints and the unit laws.
pub fn verify_algebra(candidate: &MatrixStarAlgebra, tol: f64) -> VerificationReport {
    let mut report = VerificationReport::new();
    let basis = candidate.basis();
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let r = candidate.project(&(a * b)).map_or(f64::INFINITY, |p| p.1);
            report.record(r, tol, || format!("product closure b{i}*b{j}"));
        }
        let r = candidate.project(&a.adjoint()).map_or(f64::INFINITY, |p| p.1);
        report.record(r, tol, || format!("adjoint closure b{i}^*"));
    }
    let unit = candidate.unit();
    let r = candidate.project(unit).map_or(f64::INFINITY, |p| p.1);
    report.record(r, tol, || "unit membership".into());
    for (i, b) in basis.iter().enumerate() {
        report.record(frob(&(unit * b - b)), tol, || format!("unit*b{i} = b{i}"));
        report.record(frob(&(b * unit - b)), tol, || format!("b{i}*unit = b{i}"));
    }
    report
}

/// Least-squares projection of `x` onto the algebra, with residual.
pub fn subalgebra_project(algebra: &MatrixStarAlgebra, x: &CMat) -> Result<(CMat, f64)> {
    algebra.project(x)
}

/// Declared kind of a positive map; decides which invariants are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapKind {
    State,
    ConditionalExpectation,
    CpMap,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::State => "state",
            MapKind::ConditionalExpectation => "conditional_expectation",
            MapKind::CpMap => "cp_map",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "state" => Some(MapKind::State),
            "conditional_expectation" => Some(MapKind::ConditionalExpectation),
            "cp_map" => Some(MapKind::CpMap),
            _ => None,
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A linear map between matrix algebras, stored as the matrix of
/// codomain coordinates of the images of the domain basis.
#[derive(Clone, Debug)]
pub struct PositiveMap {
    domain: MatrixStarAlgebra,
    codomain: MatrixStarAlgebra,
    matrix: CMat,
    kind: MapKind,
}

impl PositiveMap {
    pub fn new(
        domain: MatrixStarAlgebra,
        codomain: MatrixStarAlgebra,
        matrix: CMat,
        kind: MapKind,
    ) -> Result<Self> {
        if matrix.nrows() != codomain.len() || matrix.ncols() != domain.len() {
            return Err(Error::DimensionMismatch(format!(
                "map matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.len(),
                domain.len()
            )));
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        if kind == MapKind::State && !codomain.is_scalars() {
            return Err(Error::DimensionMismatch(
                "a state must take values in the scalars".into(),
            ));
        }
        Ok(Self {
            domain,
            codomain,
            matrix,
            kind,
        })
    }

    /// Tabulate `f` on the domain basis. Images must lie in the codomain.
    pub fn from_fn(
        domain: MatrixStarAlgebra,
        codomain: MatrixStarAlgebra,
        kind: MapKind,
        f: impl Fn(&CMat) -> CMat,
    ) -> Result<Self> {
        let mut matrix = linalg::zeros(codomain.len(), domain.len());
        for (j, b) in domain.basis().iter().enumerate() {
            let coords = codomain.coords(&f(b))?;
            for (i, v) in coords.into_iter().enumerate() {
                matrix[(i, j)] = v;
            }
        }
        Self::new(domain, codomain, matrix, kind)
    }

    /// `φ(a) = tr(ρ a)`.
    pub fn state_from_density(domain: MatrixStarAlgebra, rho: &CMat) -> Result<Self> {
        let values: Vec<Complex64> = domain
            .basis()
            .iter()
            .map(|b| (rho * b).trace())
            .collect();
        let matrix = CMat::from_row_slice(1, values.len(), &values);
        Self::new(domain, MatrixStarAlgebra::scalars(), matrix, MapKind::State)
    }

    /// Normalised trace `tr(a)/tr(unit)`.
    pub fn normalized_trace(domain: MatrixStarAlgebra) -> Result<Self> {
        let n = domain.unit().trace().re;
        let rho = domain.unit() * cr(1.0 / n);
        Self::state_from_density(domain, &rho)
    }

    pub fn identity(algebra: MatrixStarAlgebra, kind: MapKind) -> Result<Self> {
        let k = algebra.len();
        Self::new(algebra.clone(), algebra, linalg::identity(k), kind)
    }

    /// `T(b) = Σ K_i* b K_i` on `algebra` (images must stay inside it).
    pub fn from_kraus(algebra: MatrixStarAlgebra, kraus: &[CMat]) -> Result<Self> {
        let kraus = kraus.to_vec();
        Self::from_fn(algebra.clone(), algebra, MapKind::CpMap, move |b| {
            kraus.iter().map(|k| k.adjoint() * b * k).fold(
                linalg::zeros(b.nrows(), b.ncols()),
                |acc, t| acc + t,
            )
        })
    }

    pub fn domain(&self) -> &MatrixStarAlgebra {
        &self.domain
    }

    pub fn codomain(&self) -> &MatrixStarAlgebra {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: MapKind) -> Result<Self> {
        if kind == MapKind::State && !self.codomain.is_scalars() {
            return Err(Error::WrongKind {
                expected: "scalar codomain",
                found: self.kind,
            });
        }
        self.kind = kind;
        Ok(self)
    }

    /// Image of a domain element.
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let coords = self.domain.coords(x)?;
        Ok(self.apply_coords(&coords))
    }

    pub fn apply_coords(&self, coords: &[Complex64]) -> CMat {
        let v = CMat::from_column_slice(coords.len(), 1, coords);
        let out = &self.matrix * v;
        self.codomain.element(out.as_slice())
    }

    /// Scalar value of a state (or the `(0,0)` entry of a `1 × 1` image).
    pub fn value(&self, x: &CMat) -> Result<Complex64> {
        if !self.codomain.is_scalars() {
            return Err(Error::WrongKind {
                expected: "state",
                found: self.kind,
            });
        }
        Ok(self.apply(x)?[(0, 0)])
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &PositiveMap) -> Result<PositiveMap> {
        if first.codomain.ambient_dim() != self.domain.ambient_dim() {
            return Err(Error::DimensionMismatch(
                "composition: codomain and domain live in different ambient algebras".into(),
            ));
        }
        let mut matrix = linalg::zeros(self.codomain.len(), first.domain.len());
        for (j, b) in first.domain.basis().iter().enumerate() {
            let mid = first.apply(b)?;
            let coords = self.domain.coords(&mid)?;
            let v = CMat::from_column_slice(coords.len(), 1, &coords);
            let col = &self.matrix * v;
            matrix.set_column(j, &col.column(0));
        }
        let kind = if first.kind == self.kind && self.kind != MapKind::State {
            self.kind
        } else if self.codomain.is_scalars() {
            MapKind::State
        } else {
            MapKind::CpMap
        };
        PositiveMap::new(first.domain.clone(), self.codomain.clone(), matrix, kind)
    }

    /// Choi matrix `Σ E_ij ⊗ Φ(P(E_ij))` of the extension `Φ ∘ P` to the
    /// ambient algebra, `P` the trace-preserving projection onto the domain.
    /// The extension is CP iff the map is.
    pub fn choi_matrix(&self) -> CMat {
        let d = self.domain.ambient_dim();
        let e = self.codomain.ambient_dim();
        let mut choi = linalg::zeros(d * e, d * e);
        for i in 0..d {
            for j in 0..d {
                let eij = linalg::matrix_unit(d, i, j);
                let coords = self
                    .domain
                    .coords_unchecked(&eij)
                    .expect("matrix unit has the ambient size");
                let img = self.apply_coords(&coords);
                linalg::set_block(&mut choi, i, j, &img);
            }
        }
        choi
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.choi_matrix())
    }

    /// `‖Φ(unit) − unit‖`.
    pub fn unital_residual(&self) -> f64 {
        let coords = self
            .domain
            .coords_unchecked(self.domain.unit())
            .expect("unit has the ambient size");
        frob(&(self.apply_coords(&coords) - self.codomain.unit()))
    }

    /// Density of a state inside its own algebra: the unique `ρ` in the
    /// span with `tr(ρ b) = φ(b)` for all basis `b`.
    pub fn density(&self) -> Result<CMat> {
        if !self.codomain.is_scalars() {
            return Err(Error::WrongKind {
                expected: "state",
                found: self.kind,
            });
        }
        let basis = self.domain.basis();
        let k = basis.len();
        let pairing = CMat::from_fn(k, k, |i, j| (&basis[i] * &basis[j]).trace());
        let rhs = CMat::from_fn(k, 1, |i, _| self.matrix[(0, i)]);
        let coef = linalg::lstsq(&pairing, &rhs, RANK_RTOL);
        Ok(self.domain.element(coef.as_slice()))
    }
}

/// Check every invariant of the map's declared kind.
pub fn verify_positive_map(map: &PositiveMap, tol: f64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    match map.kind {
        MapKind::State => {
            let one = map.unital_residual();
            report.record(one, tol, || format!("phi(unit) = 1 (off by {one:.3e})"));
            let rho = map.density()?;
            report.record(frob(&(&rho - rho.adjoint())), tol, || {
                "density is self-adjoint".into()
            });
            let lambda = linalg::min_eigenvalue(&rho);
            report.record((-lambda).max(0.0), tol, || {
                format!("density is positive (min eigenvalue {lambda:.6e})")
            });
        }
        MapKind::ConditionalExpectation => {
            let dom = &map.domain;
            let cod = &map.codomain;
            if dom.ambient_dim() != cod.ambient_dim() {
                return Err(Error::CodomainNotContained {
                    residual: f64::INFINITY,
                });
            }
            let mut worst = 0.0_f64;
            for b in cod.basis() {
                worst = worst.max(dom.project(b)?.1);
            }
            if worst > tol {
                return Err(Error::CodomainNotContained { residual: worst });
            }
            let one = map.unital_residual();
            report.record(one, tol, || "Phi(unit) = unit".into());
            for (i, b) in cod.basis().iter().enumerate() {
                let r = frob(&(map.apply(b)? - b));
                report.record(r, tol, || format!("Phi(b{i}) = b{i} on the range"));
            }
            for (j, a) in dom.basis().iter().enumerate() {
                let pa = map.apply(a)?;
                for (i, b) in cod.basis().iter().enumerate() {
                    for (k, b2) in cod.basis().iter().enumerate() {
                        let lhs = map.apply(&(b * a * b2))?;
                        let rhs = b * &pa * b2;
                        report.record(frob(&(lhs - rhs)), tol, || {
                            format!("bimodule Phi(c{i} a{j} c{k}) = c{i} Phi(a{j}) c{k}")
                        });
                    }
                }
            }
            record_choi(map, tol, &mut report);
        }
        MapKind::CpMap => record_choi(map, tol, &mut report),
    }
    Ok(report)
}

fn record_choi(map: &PositiveMap, tol: f64, report: &mut VerificationReport) {
    let choi = map.choi_matrix();
    report.record(frob(&(&choi - choi.adjoint())), tol, || {
        "Choi matrix is self-adjoint".into()
    });
    let lambda = linalg::min_eigenvalue(&choi);
    report.record((-lambda).max(0.0), tol, || {
        format!("Choi matrix is positive (min eigenvalue {lambda:.6e})")
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, matrix_unit};

    fn e12_algebra() -> MatrixStarAlgebra {
        MatrixStarAlgebra::new(vec![linalg::identity(2), matrix_unit(2, 0, 1)], None).unwrap()
    }

    #[test]
    fn diagonal_two_point_algebra_passes() {
        let alg =
            MatrixStarAlgebra::new(vec![linalg::identity(2), diag_real(&[1.0, -1.0])], None)
                .unwrap();
        assert!(verify_algebra(&alg, DEFAULT_TOL).passed);
    }

    #[test]
    fn pauli_algebra_passes() {
        assert!(verify_algebra(&MatrixStarAlgebra::pauli(), DEFAULT_TOL).passed);
        assert!(verify_algebra(&MatrixStarAlgebra::full(3), DEFAULT_TOL).passed);
    }

    #[test]
    fn upper_triangular_fails_adjoint_closure() {
        let report = verify_algebra(&e12_algebra(), DEFAULT_TOL);
        assert!(!report.passed);
        // E21 is Frobenius-orthogonal to span{I, E12}: residual is exactly 1.
        assert!((report.worst_residual - 1.0).abs() < 1e-12);
        assert!(report.failures.iter().all(|f| f.identity.contains("adjoint")));
    }

    #[test]
    fn mismatched_basis_is_structural_error() {
        let err = MatrixStarAlgebra::new(vec![linalg::identity(2), linalg::identity(3)], None);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        assert!(matches!(
            MatrixStarAlgebra::new(vec![], None),
            Err(Error::EmptyBasis)
        ));
    }

    #[test]
    fn dependent_basis_rejected_and_pruned() {
        let b = vec![linalg::identity(2), linalg::identity(2) * cr(2.0)];
        assert!(matches!(
            MatrixStarAlgebra::new(b.clone(), None),
            Err(Error::LinearlyDependent { rank: 1, len: 2 })
        ));
        assert_eq!(MatrixStarAlgebra::from_spanning_set(b, None).unwrap().len(), 1);
    }

    #[test]
    fn projection_examples() {
        let diag = MatrixStarAlgebra::diagonal(2);
        let (_, r) = subalgebra_project(&diag, diag.unit()).unwrap();
        assert!(r < 1e-15);
        let (p, r) = subalgebra_project(&diag, &diag_real(&[3.0, -1.0])).unwrap();
        assert!(r < 1e-14 && frob(&(p - diag_real(&[3.0, -1.0]))) < 1e-14);
        let (p, r) = subalgebra_project(&diag, &matrix_unit(2, 0, 1)).unwrap();
        assert!((r - 1.0).abs() < 1e-14 && frob(&p) < 1e-14);
    }

    #[test]
    fn generated_algebra_of_sigma_x_is_two_dimensional() {
        let sx = pauli_basis()[1].clone();
        let alg = MatrixStarAlgebra::generated_by(2, std::slice::from_ref(&sx)).unwrap();
        assert_eq!(alg.len(), 2);
        let both = MatrixStarAlgebra::generated_by(2, &[sx, pauli_basis()[3].clone()]).unwrap();
        assert_eq!(both.len(), 4);
    }

    #[test]
    fn normalized_trace_is_a_state() {
        let tr = PositiveMap::normalized_trace(MatrixStarAlgebra::full(2)).unwrap();
        let report = verify_positive_map(&tr, DEFAULT_TOL).unwrap();
        assert!(report.passed, "{report:?}");
        assert!((tr.value(&diag_real(&[1.0, 0.0])).unwrap().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transpose_is_not_cp() {
        let m2 = MatrixStarAlgebra::full(2);
        let t = PositiveMap::from_fn(m2.clone(), m2, MapKind::CpMap, |x| x.transpose()).unwrap();
        let report = verify_positive_map(&t, DEFAULT_TOL).unwrap();
        assert!(!report.passed);
        assert!((t.choi_min_eigenvalue() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_compression_is_conditional_expectation() {
        let m2 = MatrixStarAlgebra::full(2);
        let diag = MatrixStarAlgebra::diagonal(2);
        let phi =
            PositiveMap::from_fn(m2, diag, MapKind::ConditionalExpectation, linalg::diag_part)
                .unwrap();
        assert!(verify_positive_map(&phi, DEFAULT_TOL).unwrap().passed);
    }

    #[test]
    fn conditional_expectation_needs_contained_codomain() {
        let diag = MatrixStarAlgebra::diagonal(2);
        let m3 = MatrixStarAlgebra::full(3);
        let bad = PositiveMap::new(
            diag,
            m3,
            linalg::zeros(9, 2),
            MapKind::ConditionalExpectation,
        )
        .unwrap();
        assert!(matches!(
            verify_positive_map(&bad, DEFAULT_TOL),
            Err(Error::CodomainNotContained { .. })
        ));
    }

    #[test]
    fn non_unital_embedding_has_projection_unit() {
        let p = diag_real(&[1.0, 0.0]);
        let alg = MatrixStarAlgebra::new(vec![p.clone()], Some(p)).unwrap();
        assert!(verify_algebra(&alg, DEFAULT_TOL).passed);
    }
}
