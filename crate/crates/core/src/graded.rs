//! Graded linear algebra over the polynomial rings of cones.
//!
//! Everything is computed one internal degree at a time. An element of the
//! degree-`d` piece of a free module is a [`SparseVec`] in the basis formed
//! by `monomial * generator`, generators in order and monomials of each block
//! in descending lexicographic order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{dense, Echelon, SparseVec, TrackedEchelon, Q};
use crate::poly::{monomial_count, monomials, Monomial, Poly};

/// Polynomial functions on the span of a cone, in coordinates dual to a
/// chosen basis of that span. Variables have internal degree 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeRing {
    ambient_dim: usize,
    basis: Vec<Vec<Q>>,
}

impl ConeRing {
    pub fn new(ambient_dim: usize, basis: Vec<Vec<Q>>) -> Self {
        Self { ambient_dim, basis }
    }

    /// The ground field, as the ring of the zero cone.
    pub fn field(ambient_dim: usize) -> Self {
        Self::new(ambient_dim, Vec::new())
    }

    pub fn nvars(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[Vec<Q>] {
        &self.basis
    }

    /// Dimension of the piece of internal degree `d`.
    pub fn piece_dim(&self, d: i32) -> usize {
        if d < 0 || d % 2 != 0 {
            0
        } else {
            monomial_count(self.nvars(), (d / 2) as u32)
        }
    }

    /// Coordinates of a vector of the span in the chosen basis.
    pub fn coordinates(&self, v: &[Q]) -> Option<Vec<Q>> {
        if self.basis.is_empty() {
            return v.iter().all(Zero::is_zero).then(Vec::new);
        }
        dense::solve(&self.basis, v)
    }

    /// Restriction of functions to the span of a face.
    pub fn restriction_to(&self, face: &ConeRing) -> Result<Restriction> {
        // t_j restricted = sum_k M[j][k] s_k where c_k = sum_j M[j][k] b_j
        let mut m = vec![vec![Q::zero(); face.nvars()]; self.nvars()];
        for (k, c) in face.basis.iter().enumerate() {
            let coords = self
                .coordinates(c)
                .ok_or_else(|| Error::Precondition("restriction target is not contained in the source span".into()))?;
            for (j, x) in coords.into_iter().enumerate() {
                m[j][k] = x;
            }
        }
        Ok(Restriction::new(self.nvars(), face.nvars(), m.iter().map(|row| Poly::linear(row)).collect()))
    }
}

/// Ring homomorphism given by linear images of the source variables.
pub struct Restriction {
    source_vars: usize,
    target_vars: usize,
    images: Vec<Poly>,
    monomial_cache: Mutex<HashMap<u32, Arc<Vec<Poly>>>>,
}

impl fmt::Debug for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Restriction").field("images", &self.images).finish()
    }
}

impl Restriction {
    pub fn new(source_vars: usize, target_vars: usize, images: Vec<Poly>) -> Self {
        let images = if target_vars == 0 { vec![Poly::zero(0); source_vars] } else { images };
        Self { source_vars, target_vars, images, monomial_cache: Mutex::new(HashMap::new()) }
    }

    pub fn identity(nvars: usize) -> Self {
        Self::new(nvars, nvars, (0..nvars).map(|k| Poly::var(nvars, k)).collect())
    }

    pub fn source_vars(&self) -> usize {
        self.source_vars
    }

    pub fn target_vars(&self) -> usize {
        self.target_vars
    }

    /// Image of the `k`-th source variable.
    pub fn image(&self, k: usize) -> &Poly {
        &self.images[k]
    }

    pub fn apply(&self, p: &Poly) -> Poly {
        p.substitute(&self.images, self.target_vars)
    }

    /// Images of the source monomials of total degree `e`, in basis order.
    pub fn monomial_images(&self, e: u32) -> Arc<Vec<Poly>> {
        if let Some(v) = self.monomial_cache.lock().expect("cache poisoned").get(&e) {
            return v.clone();
        }
        let basis = monomials(self.source_vars, e);
        let images: Vec<Poly> = basis
            .monomials()
            .iter()
            .map(|m| self.apply(&Poly::monomial(m.clone(), Q::one())))
            .collect();
        let images = Arc::new(images);
        self.monomial_cache.lock().expect("cache poisoned").insert(e, images.clone());
        images
    }
}

/// A range of internal degrees. The top two degrees form the guard zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DegreeWindow {
    pub min: i32,
    pub max: i32,
}

impl DegreeWindow {
    pub fn new(min: i32, max: i32) -> Self {
        Self { min, max }
    }

    /// `[-n, -n + 2(n + 2)]`.
    pub fn default_for(n: usize) -> Self {
        let n = n as i32;
        Self::new(-n, -n + 2 * (n + 2))
    }

    pub fn with_max(n: usize, max: i32) -> Self {
        Self::new(-(n as i32), max)
    }

    pub fn degrees(&self) -> impl Iterator<Item = i32> + Clone {
        self.min..=self.max
    }

    pub fn contains(&self, d: i32) -> bool {
        self.min <= d && d <= self.max
    }

    pub fn in_guard_zone(&self, d: i32) -> bool {
        d > self.max - 2 && d <= self.max
    }
}

/// Dimension per internal degree.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HilbertFunction(pub BTreeMap<i32, usize>);

impl HilbertFunction {
    pub fn get(&self, d: i32) -> usize {
        self.0.get(&d).copied().unwrap_or(0)
    }

    pub fn add(&self, other: &HilbertFunction) -> HilbertFunction {
        let mut out = self.0.clone();
        for (d, v) in &other.0 {
            *out.entry(*d).or_default() += v;
        }
        HilbertFunction(out)
    }

    /// Same values on every degree of the window.
    pub fn agrees_on(&self, other: &HilbertFunction, window: DegreeWindow) -> bool {
        window.degrees().all(|d| self.get(d) == other.get(d))
    }
}

/// One block of a graded piece: the span of `monomials(e) * generator`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub generator: usize,
    pub offset: usize,
    pub poly_degree: u32,
    pub len: usize,
}

/// Free graded module over a cone ring, given by generator degrees.
#[derive(Clone, Debug)]
pub struct FreeGradedModule {
    pub ring: Arc<ConeRing>,
    pub generators: Vec<i32>,
}

impl PartialEq for FreeGradedModule {
    fn eq(&self, other: &Self) -> bool {
        self.ring == other.ring && self.generators == other.generators
    }
}

impl FreeGradedModule {
    pub fn new(ring: Arc<ConeRing>, generators: Vec<i32>) -> Self {
        Self { ring, generators }
    }

    pub fn zero(ring: Arc<ConeRing>) -> Self {
        Self::new(ring, Vec::new())
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn is_zero(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.ring.nvars()
    }

    /// Polynomial degree of the coefficient of generator `g` in degree `d`.
    pub fn poly_degree(&self, g: usize, d: i32) -> Option<u32> {
        let e = d - self.generators[g];
        (e >= 0 && e % 2 == 0).then_some((e / 2) as u32)
    }

    pub fn layout(&self, d: i32) -> Vec<Block> {
        let mut out = Vec::new();
        let mut offset = 0;
        for g in 0..self.generators.len() {
            if let Some(e) = self.poly_degree(g, d) {
                let len = monomial_count(self.nvars(), e);
                out.push(Block { generator: g, offset, poly_degree: e, len });
                offset += len;
            }
        }
        out
    }

    pub fn dim_at(&self, d: i32) -> usize {
        (0..self.generators.len())
            .filter_map(|g| self.poly_degree(g, d))
            .map(|e| monomial_count(self.nvars(), e))
            .sum()
    }

    pub fn hilbert(&self, window: DegreeWindow) -> HilbertFunction {
        HilbertFunction(window.degrees().map(|d| (d, self.dim_at(d))).collect())
    }

    /// Monomial basis of the piece of degree `d` as (generator, monomial).
    pub fn evaluate_degree(&self, d: i32) -> Vec<(usize, Monomial)> {
        let mut out = Vec::new();
        for b in self.layout(d) {
            for m in monomials(self.nvars(), b.poly_degree).monomials() {
                out.push((b.generator, m.clone()));
            }
        }
        out
    }

    /// Coefficient polynomials of an element of degree `d`, one per generator.
    pub fn to_polys(&self, d: i32, v: &SparseVec) -> Vec<Poly> {
        let mut out = vec![Poly::zero(self.nvars()); self.rank()];
        for b in self.layout(d) {
            out[b.generator] = Poly::from_vector(self.nvars(), b.poly_degree, &v.slice(b.offset, b.offset + b.len));
        }
        out
    }

    /// Inverse of [`FreeGradedModule::to_polys`]. Coefficients must be
    /// homogeneous of the matching degree.
    pub fn from_polys(&self, d: i32, polys: &[Poly]) -> SparseVec {
        let mut out = SparseVec::new();
        for b in self.layout(d) {
            let p = &polys[b.generator];
            if !p.is_zero() {
                out = out.add(&p.to_vector(b.poly_degree, b.offset));
            }
        }
        out
    }

    /// Columns of multiplication by a homogeneous polynomial of polynomial
    /// degree `e` (in this module's ring), from degree `d` to `d + 2e`.
    pub fn multiply_matrix(&self, d: i32, f: &Poly, e: u32) -> Vec<SparseVec> {
        let target = self.layout(d + 2 * e as i32);
        let target_offset: HashMap<usize, usize> = target.iter().map(|b| (b.generator, b.offset)).collect();
        let mut cols = Vec::with_capacity(self.dim_at(d));
        for b in self.layout(d) {
            let tb = monomials(self.nvars(), b.poly_degree + e);
            let off = target_offset[&b.generator];
            for m in monomials(self.nvars(), b.poly_degree).monomials() {
                cols.push(SparseVec::from_pairs(f.terms().map(|(fm, c)| (off + tb.index_of(&fm.mul(m)), c.clone()))));
            }
        }
        cols
    }

    /// Multiplies an element of degree `d` by a monomial.
    pub fn multiply_monomial(&self, d: i32, v: &SparseVec, m: &Monomial) -> SparseVec {
        let e = m.degree();
        let target = self.layout(d + 2 * e as i32);
        let target_offset: HashMap<usize, usize> = target.iter().map(|b| (b.generator, b.offset)).collect();
        let mut pairs = Vec::with_capacity(v.nnz());
        for b in self.layout(d) {
            let src = monomials(self.nvars(), b.poly_degree);
            let tb = monomials(self.nvars(), b.poly_degree + e);
            let off = target_offset[&b.generator];
            for (i, c) in v.slice(b.offset, b.offset + b.len).iter() {
                pairs.push((off + tb.index_of(&src.get(i).mul(m)), c.clone()));
            }
        }
        SparseVec::from_pairs(pairs)
    }

    /// The element `generator g` itself, in degree `generators[g]`.
    pub fn generator_vector(&self, g: usize) -> SparseVec {
        let d = self.generators[g];
        let b = self.layout(d).into_iter().find(|b| b.generator == g).expect("generator block");
        SparseVec::unit(b.offset)
    }
}

/// Module map `M_source -> M_target` compatible with a ring restriction.
/// Entry `(i, j)` is the coefficient of target generator `i` in the image of
/// source generator `j`, a polynomial in the target ring.
pub struct PolyMatrix {
    pub source: FreeGradedModule,
    pub target: FreeGradedModule,
    pub restriction: Arc<Restriction>,
    pub entries: Vec<Vec<Poly>>,
    cache: Mutex<HashMap<i32, Arc<Vec<SparseVec>>>>,
}

impl fmt::Debug for PolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolyMatrix")
            .field("source", &self.source.generators)
            .field("target", &self.target.generators)
            .field("entries", &self.entries)
            .finish()
    }
}

impl Clone for PolyMatrix {
    fn clone(&self) -> Self {
        Self::new_unchecked(self.source.clone(), self.target.clone(), self.restriction.clone(), self.entries.clone())
    }
}

impl PolyMatrix {
    /// Checks that every entry is homogeneous of the right degree.
    pub fn new(
        source: FreeGradedModule,
        target: FreeGradedModule,
        restriction: Arc<Restriction>,
        entries: Vec<Vec<Poly>>,
    ) -> Result<Self> {
        if entries.len() != target.rank() || entries.iter().any(|row| row.len() != source.rank()) {
            return Err(Error::Certificate("matrix shape does not match the modules".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                let e = source.generators[j] - target.generators[i];
                if e < 0 || e % 2 != 0 || !p.is_homogeneous_of((e / 2) as u32) {
                    return Err(Error::Certificate(format!("entry ({i}, {j}) is not homogeneous of degree {e}")));
                }
            }
        }
        Ok(Self::new_unchecked(source, target, restriction, entries))
    }

    fn new_unchecked(
        source: FreeGradedModule,
        target: FreeGradedModule,
        restriction: Arc<Restriction>,
        entries: Vec<Vec<Poly>>,
    ) -> Self {
        Self { source, target, restriction, entries, cache: Mutex::new(HashMap::new()) }
    }

    pub fn zero(source: FreeGradedModule, target: FreeGradedModule, restriction: Arc<Restriction>) -> Self {
        let entries = vec![vec![Poly::zero(target.nvars()); source.rank()]; target.rank()];
        Self::new_unchecked(source, target, restriction, entries)
    }

    /// Builds the matrix from the images of the source generators, each an
    /// element of the target in the degree of that generator.
    pub fn from_columns(
        source: FreeGradedModule,
        target: FreeGradedModule,
        restriction: Arc<Restriction>,
        columns: &[SparseVec],
    ) -> Self {
        let mut entries = vec![vec![Poly::zero(target.nvars()); source.rank()]; target.rank()];
        for (j, col) in columns.iter().enumerate() {
            for (i, p) in target.to_polys(source.generators[j], col).into_iter().enumerate() {
                entries[i][j] = p;
            }
        }
        Self::new_unchecked(source, target, restriction, entries)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(Poly::is_zero)
    }

    /// Image of source generator `j` as an element of the target.
    pub fn column(&self, j: usize) -> SparseVec {
        let col: Vec<Poly> = self.entries.iter().map(|row| row[j].clone()).collect();
        self.target.from_polys(self.source.generators[j], &col)
    }

    pub fn scaled(&self, c: &Q) -> PolyMatrix {
        let entries = self.entries.iter().map(|row| row.iter().map(|p| p.scale(c)).collect()).collect();
        Self::new_unchecked(self.source.clone(), self.target.clone(), self.restriction.clone(), entries)
    }

    /// Columns of the linear map on the pieces of degree `d`.
    pub fn degree_matrix(&self, d: i32) -> Arc<Vec<SparseVec>> {
        if let Some(m) = self.cache.lock().expect("cache poisoned").get(&d) {
            return m.clone();
        }
        let mut cols = Vec::with_capacity(self.source.dim_at(d));
        for b in self.source.layout(d) {
            let images = self.restriction.monomial_images(b.poly_degree);
            let column_polys: Vec<&Poly> = self.entries.iter().map(|row| &row[b.generator]).collect();
            for f in images.iter() {
                let polys: Vec<Poly> = column_polys.iter().map(|p| if p.is_zero() { Poly::zero(self.target.nvars()) } else { f.mul(p) }).collect();
                cols.push(self.target.from_polys(d, &polys));
            }
        }
        let cols = Arc::new(cols);
        self.cache.lock().expect("cache poisoned").insert(d, cols.clone());
        cols
    }

    /// Entries of `second ∘ self`, in the ring of `second`'s target.
    pub fn compose(&self, second: &PolyMatrix) -> Vec<Vec<Poly>> {
        let nv = second.target.nvars();
        let mut out = vec![vec![Poly::zero(nv); self.source.rank()]; second.target.rank()];
        for (j, _) in self.source.generators.iter().enumerate() {
            for (l, row) in self.entries.iter().enumerate() {
                let p = &row[j];
                if p.is_zero() {
                    continue;
                }
                let rp = second.restriction.apply(p);
                for (i, out_row) in out.iter_mut().enumerate() {
                    let q = &second.entries[i][l];
                    if !q.is_zero() {
                        out_row[j] = out_row[j].add(&rp.mul(q));
                    }
                }
            }
        }
        out
    }
}

/// One summand of a [`ModuleSum`].
#[derive(Clone, Debug)]
pub struct SumPart {
    pub module: FreeGradedModule,
    /// Image of each acting variable in the ring of `module`.
    pub var_images: Vec<Poly>,
}

/// Direct sum of free modules over different rings, viewed as a module over
/// one acting ring through restrictions.
#[derive(Clone, Debug)]
pub struct ModuleSum {
    pub acting: Arc<ConeRing>,
    pub parts: Vec<SumPart>,
}

impl ModuleSum {
    pub fn single(module: FreeGradedModule) -> Self {
        let nv = module.nvars();
        let acting = module.ring.clone();
        Self { acting, parts: vec![SumPart { module, var_images: (0..nv).map(|k| Poly::var(nv, k)).collect() }] }
    }

    pub fn new(acting: Arc<ConeRing>) -> Self {
        Self { acting, parts: Vec::new() }
    }

    pub fn push(&mut self, module: FreeGradedModule, restriction: &Restriction) {
        let var_images = (0..restriction.source_vars()).map(|k| restriction.image(k).clone()).collect();
        self.parts.push(SumPart { module, var_images });
    }

    pub fn offsets(&self, d: i32) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        let mut o = 0;
        out.push(0);
        for p in &self.parts {
            o += p.module.dim_at(d);
            out.push(o);
        }
        out
    }

    pub fn dim_at(&self, d: i32) -> usize {
        self.parts.iter().map(|p| p.module.dim_at(d)).sum()
    }

    pub fn hilbert(&self, window: DegreeWindow) -> HilbertFunction {
        HilbertFunction(window.degrees().map(|d| (d, self.dim_at(d))).collect())
    }

    /// Block of part `i` of an element of degree `d`.
    pub fn part(&self, d: i32, v: &SparseVec, i: usize) -> SparseVec {
        let off = self.offsets(d);
        v.slice(off[i], off[i + 1])
    }

    /// Columns of multiplication by acting variable `k`, degree `d -> d+2`.
    pub fn multiply_var(&self, d: i32, k: usize) -> Vec<SparseVec> {
        let target = self.offsets(d + 2);
        let mut cols = Vec::with_capacity(self.dim_at(d));
        for (i, p) in self.parts.iter().enumerate() {
            for c in p.module.multiply_matrix(d, &p.var_images[k], 1) {
                cols.push(c.shifted(target[i]));
            }
        }
        cols
    }

    /// Multiplies an element of degree `d` by an acting monomial.
    pub fn multiply_monomial(&self, d: i32, v: &SparseVec, m: &Monomial) -> SparseVec {
        let mut cur = v.clone();
        let mut deg = d;
        for (k, &e) in m.0.iter().enumerate() {
            for _ in 0..e {
                let cols = self.multiply_var(deg, k);
                cur = cur.apply(&cols);
                deg += 2;
            }
        }
        cur
    }
}

/// A graded subspace of a [`ModuleSum`], one basis per degree.
#[derive(Clone, Debug)]
pub struct GradedSubspaceFamily {
    pub window: DegreeWindow,
    pub pieces: BTreeMap<i32, Vec<SparseVec>>,
}

impl GradedSubspaceFamily {
    pub fn zero(window: DegreeWindow) -> Self {
        Self { window, pieces: window.degrees().map(|d| (d, Vec::new())).collect() }
    }

    /// Whole ambient in every degree.
    pub fn full(ambient: &ModuleSum, window: DegreeWindow) -> Self {
        Self {
            window,
            pieces: window.degrees().map(|d| (d, (0..ambient.dim_at(d)).map(SparseVec::unit).collect())).collect(),
        }
    }

    pub fn piece(&self, d: i32) -> &[SparseVec] {
        self.pieces.get(&d).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn dim_at(&self, d: i32) -> usize {
        self.piece(d).len()
    }

    pub fn hilbert(&self) -> HilbertFunction {
        HilbertFunction(self.window.degrees().map(|d| (d, self.dim_at(d))).collect())
    }

    /// `x * piece(d) ⊆ piece(d + 2)` for every acting variable.
    pub fn is_multiplication_closed(&self, ambient: &ModuleSum) -> bool {
        self.window.degrees().filter(|d| d + 2 <= self.window.max).all(|d| {
            let upper = Echelon::from_vectors(self.piece(d + 2));
            (0..ambient.acting.nvars()).all(|k| {
                let cols = ambient.multiply_var(d, k);
                self.piece(d).iter().all(|v| upper.contains(&v.apply(&cols)))
            })
        })
    }
}

/// Kernel of a degreewise map, with `map(d)` the columns on degree `d`.
pub fn kernel_degreewise<F>(window: DegreeWindow, map: F) -> GradedSubspaceFamily
where
    F: Fn(i32) -> Vec<SparseVec> + Sync,
{
    let degrees: Vec<i32> = window.degrees().collect();
    let pieces: Vec<(i32, Vec<SparseVec>)> = degrees
        .par_iter()
        .map(|&d| (d, TrackedEchelon::from_columns(&map(d)).into_kernel()))
        .collect();
    GradedSubspaceFamily { window, pieces: pieces.into_iter().collect() }
}

/// Span of `x_k * Z_{d-2}` over all acting variables.
pub fn maximal_ideal_part(z: &GradedSubspaceFamily, ambient: &ModuleSum, d: i32) -> Echelon {
    let mut ech = Echelon::new();
    if !z.window.contains(d - 2) {
        return ech;
    }
    for k in 0..ambient.acting.nvars() {
        let cols = ambient.multiply_var(d - 2, k);
        for v in z.piece(d - 2) {
            ech.insert(v.apply(&cols));
        }
    }
    ech
}

/// Representatives of a basis of `Z / mZ`, degree by degree.
pub fn minimal_generators(z: &GradedSubspaceFamily, ambient: &ModuleSum) -> Vec<(i32, SparseVec)> {
    let degrees: Vec<i32> = z.window.degrees().collect();
    let per_degree: Vec<Vec<(i32, SparseVec)>> = degrees
        .par_iter()
        .map(|&d| {
            let mut ech = maximal_ideal_part(z, ambient, d);
            let mut out = Vec::new();
            for v in z.piece(d) {
                if ech.insert(v.clone()) {
                    out.push((d, v.clone()));
                }
            }
            out
        })
        .collect();
    per_degree.into_iter().flatten().collect()
}

/// Minimal free cover `L -> Z` over the acting ring.
#[derive(Clone, Debug)]
pub struct FreeCover {
    pub module: FreeGradedModule,
    /// Image of each generator of `module`, in the ambient.
    pub representatives: Vec<SparseVec>,
}

impl FreeCover {
    /// Spanning set of the image in degree `d` built from lower degrees.
    pub fn image_at(&self, ambient: &ModuleSum, window: DegreeWindow) -> BTreeMap<i32, Echelon> {
        let mut out: BTreeMap<i32, Echelon> = BTreeMap::new();
        for d in window.degrees() {
            let mut ech = Echelon::new();
            if let Some(prev) = out.get(&(d - 2)) {
                for k in 0..ambient.acting.nvars() {
                    let cols = ambient.multiply_var(d - 2, k);
                    for v in prev.rows() {
                        ech.insert(v.apply(&cols));
                    }
                }
            }
            for (g, r) in self.module.generators.iter().zip(&self.representatives) {
                if *g == d {
                    ech.insert(r.clone());
                }
            }
            out.insert(d, ech);
        }
        out
    }

    /// Image equals `z` on every degree of the window.
    pub fn covers(&self, z: &GradedSubspaceFamily, ambient: &ModuleSum) -> bool {
        let image = self.image_at(ambient, z.window);
        z.window.degrees().all(|d| {
            let ech = &image[&d];
            let zd = Echelon::from_vectors(z.piece(d));
            ech.dim() == zd.dim() && ech.rows().all(|v| zd.contains(v))
        })
    }

    /// Degreewise freeness certificate: the cover is injective on the window.
    pub fn certifies_free(&self, z: &GradedSubspaceFamily) -> bool {
        self.module.hilbert(z.window).agrees_on(&z.hilbert(), z.window)
    }

    /// The covering map split into one matrix per ambient part.
    pub fn part_matrices(&self, ambient: &ModuleSum, restrictions: &[Arc<Restriction>]) -> Vec<PolyMatrix> {
        ambient
            .parts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let cols: Vec<SparseVec> = self
                    .module
                    .generators
                    .iter()
                    .zip(&self.representatives)
                    .map(|(g, r)| ambient.part(*g, r, i))
                    .collect();
                PolyMatrix::from_columns(self.module.clone(), p.module.clone(), restrictions[i].clone(), &cols)
            })
            .collect()
    }
}

/// Free module on the minimal generators of `z`, mapping onto `z`. New
/// generators in the guard zone are reported as an exhausted window at `cone`.
pub fn minimal_free_cover(z: &GradedSubspaceFamily, ambient: &ModuleSum, cone: usize) -> Result<FreeCover> {
    let gens = minimal_generators(z, ambient);
    if let Some((d, _)) = gens.iter().find(|(d, _)| z.window.in_guard_zone(*d)) {
        return Err(Error::WindowExhausted { cone, degree: *d });
    }
    Ok(FreeCover {
        module: FreeGradedModule::new(ambient.acting.clone(), gens.iter().map(|(d, _)| *d).collect()),
        representatives: gens.into_iter().map(|(_, v)| v).collect(),
    })
}

/// New generators of a free module, split into the part covering `Z_K`
/// and the part mapping into `Z_N`. Each generator is an element of the
/// original module in its own degree.
#[derive(Clone, Debug)]
pub struct Split {
    pub k_part: Vec<(i32, SparseVec)>,
    pub n_part: Vec<(i32, SparseVec)>,
}

impl Split {
    pub fn generators(&self) -> impl Iterator<Item = &(i32, SparseVec)> + '_ {
        self.k_part.iter().chain(&self.n_part)
    }
}

/// Splits a surjection `L -> Z = Z_K ⊕ Z_N` of graded modules into
/// `L_K ⊕ L_N` with `L_K` mapping onto `Z_K` minimally and `L_N` into `Z_N`.
///
/// `map(d)` gives the columns of `L_d -> ambient_d`.
pub fn split_surjection<F>(
    source: &FreeGradedModule,
    ambient: &ModuleSum,
    map: F,
    z_k: &GradedSubspaceFamily,
    z_n: &GradedSubspaceFamily,
    cone: usize,
) -> Result<Split>
where
    F: Fn(i32) -> Vec<SparseVec> + Sync,
{
    let window = z_k.window;
    let nv = source.nvars();
    let top = source.generators.iter().copied().max();
    let tracked: BTreeMap<i32, TrackedEchelon> = window
        .degrees()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&d| (d, TrackedEchelon::from_columns(&map(d))))
        .collect();

    // lifts of minimal generators of Z_K
    let mut k_part: Vec<(i32, SparseVec)> = Vec::new();
    for (d, z) in minimal_generators(z_k, ambient) {
        let lift = tracked[&d].preimage(&z).ok_or(Error::NotLocallyExact { cone, degree: d })?;
        k_part.push((d, lift));
    }
    if let Some(top) = top {
        if k_part.iter().any(|(d, _)| *d > top) {
            return Err(Error::Certificate(format!("cone {cone}: Z_K needs generators above those of the source")));
        }
    }

    // reduction mod m of an element of degree d: constant coefficients
    let reduce = |d: i32, v: &SparseVec| -> SparseVec {
        let mut pairs = Vec::new();
        for b in source.layout(d) {
            if b.poly_degree == 0 {
                pairs.push((b.generator, v.get(b.offset)));
            }
        }
        SparseVec::from_pairs(pairs)
    };
    let mut residues = Echelon::new();
    for (d, s) in &k_part {
        if !residues.insert(reduce(*d, s)) {
            return Err(Error::Certificate(format!("cone {cone}: lifted generators are dependent modulo m")));
        }
    }

    let z_k_ech: BTreeMap<i32, Echelon> = window.degrees().map(|d| (d, Echelon::from_vectors(z_k.piece(d)))).collect();
    let z_n_ech: BTreeMap<i32, Echelon> = window.degrees().map(|d| (d, Echelon::from_vectors(z_n.piece(d)))).collect();

    let mut n_part = Vec::new();
    for g in 0..source.rank() {
        let d = source.generators[g];
        let unit = source.generator_vector(g);
        if !residues.insert(reduce(d, &unit)) {
            continue;
        }
        // remove the Z_K component of d(g) using multiples of k_part
        let image = unit.apply(&map(d));
        let (k_comp, n_comp) = decompose_in(&image, &z_k_ech[&d], &z_n_ech[&d])
            .ok_or(Error::Certificate(format!("cone {cone}: image of a generator is not in Z_K + Z_N")))?;
        let mut s = unit;
        if !k_comp.is_zero() {
            let mut candidates: Vec<SparseVec> = Vec::new();
            let mut images: Vec<SparseVec> = Vec::new();
            for (dk, sk) in &k_part {
                let e = d - dk;
                if e < 0 || e % 2 != 0 {
                    continue;
                }
                for mu in monomials(nv, (e / 2) as u32).monomials() {
                    let elem = source.multiply_monomial(*dk, sk, mu);
                    images.push(elem.apply(&map(d)));
                    candidates.push(elem);
                }
            }
            let solver = TrackedEchelon::from_columns(&images);
            let coeffs = solver
                .preimage(&k_comp)
                .ok_or(Error::Certificate(format!("cone {cone}: Z_K component is not generated by the lifts")))?;
            for (i, c) in coeffs.iter() {
                s.axpy(&-c.clone(), &candidates[i]);
            }
        }
        debug_assert!(s.apply(&map(d)) == n_comp || z_n_ech[&d].contains(&s.apply(&map(d))));
        n_part.push((d, s));
    }
    if k_part.len() + n_part.len() != source.rank() {
        return Err(Error::Certificate(format!("cone {cone}: split does not give a basis")));
    }
    Ok(Split { k_part, n_part })
}

/// Writes `v = a + b` with `a` in the first space and `b` in the second.
fn decompose_in(v: &SparseVec, first: &Echelon, second: &Echelon) -> Option<(SparseVec, SparseVec)> {
    let basis: Vec<SparseVec> = first.rows().chain(second.rows()).cloned().collect();
    let split_at = first.dim();
    let coeffs = TrackedEchelon::from_columns(&basis).preimage(v)?;
    let mut a = SparseVec::new();
    let mut b = SparseVec::new();
    for (i, c) in coeffs.iter() {
        if i < split_at {
            a.axpy(c, &basis[i]);
        } else {
            b.axpy(c, &basis[i]);
        }
    }
    Some((a, b))
}

/// Expresses elements of a free module in a new generating set that is a
/// basis (as checked by squareness of every degree).
pub struct BasisChange {
    pub old: FreeGradedModule,
    pub new: FreeGradedModule,
    generators: Vec<SparseVec>,
    solvers: Mutex<HashMap<i32, Arc<TrackedEchelon>>>,
}

impl BasisChange {
    pub fn new(old: FreeGradedModule, generators: Vec<(i32, SparseVec)>) -> Self {
        let new = FreeGradedModule::new(old.ring.clone(), generators.iter().map(|(d, _)| *d).collect());
        Self { old, new, generators: generators.into_iter().map(|(_, v)| v).collect(), solvers: Mutex::new(HashMap::new()) }
    }

    /// Columns: the new basis of degree `d` written in old coordinates.
    pub fn new_basis_in_old(&self, d: i32) -> Vec<SparseVec> {
        let mut cols = Vec::new();
        for b in self.new.layout(d) {
            let g = self.new.generators[b.generator];
            for mu in monomials(self.new.nvars(), b.poly_degree).monomials() {
                cols.push(self.old.multiply_monomial(g, &self.generators[b.generator], mu));
            }
        }
        cols
    }

    fn solver(&self, d: i32) -> Arc<TrackedEchelon> {
        if let Some(s) = self.solvers.lock().expect("cache poisoned").get(&d) {
            return s.clone();
        }
        let s = Arc::new(TrackedEchelon::from_columns(&self.new_basis_in_old(d)));
        self.solvers.lock().expect("cache poisoned").insert(d, s.clone());
        s
    }

    /// True when every degree of the window is an isomorphism.
    pub fn is_invertible(&self, window: DegreeWindow) -> bool {
        window.degrees().all(|d| {
            let s = self.solver(d);
            s.rank() == self.old.dim_at(d) && s.source_dim() == s.rank()
        })
    }

    /// New coordinates of an old element of degree `d`.
    pub fn to_new(&self, d: i32, v: &SparseVec) -> Option<SparseVec> {
        self.solver(d).preimage(v)
    }

    /// Old coordinates of the `g`-th new generator.
    pub fn generator(&self, g: usize) -> &SparseVec {
        &self.generators[g]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    fn ring(basis: Vec<Vec<i64>>, n: usize) -> Arc<ConeRing> {
        Arc::new(ConeRing::new(n, basis.iter().map(|b| dense::to_q(b)).collect()))
    }

    #[test]
    fn restriction_examples() {
        let quadrant = ring(vec![vec![1, 0], vec![0, 1]], 2);
        let e2 = ring(vec![vec![0, 1]], 2);
        let r = quadrant.restriction_to(&e2).unwrap();
        assert!(r.apply(&Poly::var(2, 0)).is_zero());
        assert_eq!(r.apply(&Poly::one(2)), Poly::one(1));

        // x + y on cone(e1, e1+e2) written in coordinates (x, y) of the plane
        let plane = ring(vec![vec![1, 0], vec![0, 1]], 2);
        let diag = ring(vec![vec![1, 1]], 2);
        let r = plane.restriction_to(&diag).unwrap();
        assert_eq!(r.apply(&Poly::linear(&[q(1), q(1)])), Poly::linear(&[q(2)]));
    }

    #[test]
    fn piece_dimensions() {
        let point = Arc::new(ConeRing::field(1));
        let m = FreeGradedModule::new(point, vec![-1]);
        assert_eq!(m.dim_at(-1), 1);
        assert_eq!(m.dim_at(1), 0);

        let plane = ring(vec![vec![1, 0], vec![0, 1]], 2);
        let a2 = FreeGradedModule::new(plane.clone(), vec![-2]);
        assert_eq!(a2.dim_at(0), 2);
        let h = a2.hilbert(DegreeWindow::new(-2, 4));
        assert_eq!((h.get(-2), h.get(0), h.get(2), h.get(4)), (1, 2, 3, 4));

        let sum = FreeGradedModule::new(plane, vec![-2, 0]);
        for k in 1..5 {
            assert_eq!(sum.dim_at(2 * k - 2), (2 * k + 1) as usize);
        }
    }

    fn p1_evaluation() -> (ModuleSum, GradedSubspaceFamily) {
        // A_{rho+}(1) + A_{rho-}(1) -> R(1), (f, g) -> f(0) - g(0)
        let line = ring(vec![vec![1]], 1);
        let point = Arc::new(ConeRing::field(1));
        let to_point = Arc::new(line.restriction_to(&point).unwrap());
        let source = FreeGradedModule::new(line.clone(), vec![-1]);
        let target = FreeGradedModule::new(point.clone(), vec![-1]);
        let f = PolyMatrix::new(source.clone(), target.clone(), to_point.clone(), vec![vec![Poly::one(0)]]).unwrap();
        let g = f.scaled(&q(-1));
        let window = DegreeWindow::new(-1, 5);
        let z = kernel_degreewise(window, |d| {
            let mut cols: Vec<SparseVec> = f.degree_matrix(d).to_vec();
            cols.extend(g.degree_matrix(d).iter().cloned());
            cols
        });
        let mut ambient = ModuleSum::new(line.clone());
        let id = Restriction::identity(1);
        ambient.push(source.clone(), &id);
        ambient.push(source, &id);
        (ambient, z)
    }

    #[test]
    fn p1_evaluation_kernel() {
        let (ambient, z) = p1_evaluation();
        assert_eq!((z.dim_at(-1), z.dim_at(1), z.dim_at(3), z.dim_at(5)), (1, 2, 2, 2));
        assert!(z.is_multiplication_closed(&ambient));
        let gens: Vec<i32> = minimal_generators(&z, &ambient).iter().map(|(d, _)| *d).collect();
        assert_eq!(gens, vec![-1, 1]);
        let cover = minimal_free_cover(&z, &ambient, 0).unwrap();
        assert!(cover.covers(&z, &ambient));
        assert!(cover.certifies_free(&z));
    }

    #[test]
    fn zero_and_injective_maps() {
        let plane = ring(vec![vec![1, 0], vec![0, 1]], 2);
        let m = FreeGradedModule::new(plane.clone(), vec![-2]);
        let id = Arc::new(Restriction::identity(2));
        let window = DegreeWindow::new(-2, 4);
        let zero = PolyMatrix::zero(m.clone(), m.clone(), id.clone());
        let z = kernel_degreewise(window, |d| zero.degree_matrix(d).to_vec());
        assert_eq!(z.hilbert(), m.hilbert(window));
        let gens = minimal_generators(&z, &ModuleSum::single(m.clone()));
        assert_eq!(gens.len(), 1);
        assert_eq!(gens[0].0, -2);

        let mul = PolyMatrix::new(m.clone(), FreeGradedModule::new(plane, vec![-4]), id, vec![vec![Poly::linear(&[q(1), q(-1)])]])
            .unwrap();
        let z = kernel_degreewise(window, |d| mul.degree_matrix(d).to_vec());
        assert!(window.degrees().all(|d| z.dim_at(d) == 0));
    }

    #[test]
    fn blowup_kernel_generators() {
        // pairs (p, q) on the two cones of the blown-up quadrant agreeing on
        // the ray (1, 1); both rings use ambient coordinates (x, y)
        let plane = ring(vec![vec![1, 0], vec![0, 1]], 2);
        let diag = ring(vec![vec![1, 1]], 2);
        let r = Arc::new(plane.restriction_to(&diag).unwrap());
        let m = FreeGradedModule::new(plane.clone(), vec![-2]);
        let t = FreeGradedModule::new(diag, vec![-2]);
        let f = PolyMatrix::new(m.clone(), t.clone(), r.clone(), vec![vec![Poly::one(1)]]).unwrap();
        let window = DegreeWindow::new(-2, 6);
        let z = kernel_degreewise(window, |d| {
            let mut cols = f.degree_matrix(d).to_vec();
            cols.extend(f.scaled(&q(-1)).degree_matrix(d).iter().cloned());
            cols
        });
        for k in 0..4 {
            assert_eq!(z.dim_at(-2 + 2 * k), (2 * k + 1) as usize);
        }
        let mut ambient = ModuleSum::new(plane);
        let id = Restriction::identity(2);
        ambient.push(m.clone(), &id);
        ambient.push(m, &id);
        let cover = minimal_free_cover(&z, &ambient, 0).unwrap();
        assert_eq!(cover.module.generators, vec![-2, 0]);
        assert!(cover.certifies_free(&z));

        // split off the submodule generated by the degree -2 generator
        let full = FreeGradedModule::new(ambient.acting.clone(), vec![-2, 0]);
        let reps = cover.representatives.clone();
        let map = |d: i32| -> Vec<SparseVec> {
            let mut cols = Vec::new();
            for b in full.layout(d) {
                for mu in monomials(2, b.poly_degree).monomials() {
                    cols.push(ambient.multiply_monomial(full.generators[b.generator], &reps[b.generator], mu));
                }
            }
            cols
        };
        let sub = FreeCover { module: FreeGradedModule::new(ambient.acting.clone(), vec![-2]), representatives: vec![reps[0].clone()] };
        let image = sub.image_at(&ambient, window);
        let z_k = GradedSubspaceFamily { window, pieces: image.iter().map(|(d, e)| (*d, e.rows().cloned().collect())).collect() };
        // complement: span of the second generator's multiples
        let other = FreeCover { module: FreeGradedModule::new(ambient.acting.clone(), vec![0]), representatives: vec![reps[1].clone()] };
        let image = other.image_at(&ambient, window);
        let z_n = GradedSubspaceFamily { window, pieces: image.iter().map(|(d, e)| (*d, e.rows().cloned().collect())).collect() };
        let split = split_surjection(&full, &ambient, map, &z_k, &z_n, 0).unwrap();
        assert_eq!(split.k_part.iter().map(|(d, _)| *d).collect::<Vec<_>>(), vec![-2]);
        assert_eq!(split.n_part.len(), 1);
        let change = BasisChange::new(full, split.generators().cloned().collect());
        assert!(change.is_invertible(window));
    }

    #[test]
    fn rank_nullity_for_poly_matrices() {
        let plane = ring(vec![vec![1, 0], vec![0, 1]], 2);
        let m = FreeGradedModule::new(plane.clone(), vec![-2, 0]);
        let t = FreeGradedModule::new(plane, vec![-4]);
        let id = Arc::new(Restriction::identity(2));
        let entries = vec![vec![Poly::linear(&[q(1), q(2)]), Poly::linear(&[q(1), q(0)]).pow(2)]];
        let f = PolyMatrix::new(m.clone(), t, id, entries).unwrap();
        for d in -2..6 {
            let cols = f.degree_matrix(d);
            let t = TrackedEchelon::from_columns(&cols);
            assert_eq!(t.rank() + t.kernel().len(), m.dim_at(d));
        }
    }
}
