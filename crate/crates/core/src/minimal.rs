//! Minimal complexes and shifted minimal complexes, built cone by cone.
//!
//! The component at a cone is the minimal free cover of the kernel of the
//! boundary differential on its faces. Starting from the base cone, cones of
//! the star are processed by increasing dimension.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::complex::{CohomologyTable, FanComplex};
use crate::error::{Error, Result};
use crate::exact::{q, Echelon, SparseVec};
use crate::fan::{subdivision_map, ConeId, Fan};
use crate::graded::{maximal_ideal_part, minimal_free_cover, DegreeWindow, FreeCover, GradedSubspaceFamily};

/// Order in which cones of equal dimension are visited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConeOrder {
    #[default]
    Canonical,
    Reversed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    pub window: DegreeWindow,
    pub order: ConeOrder,
    /// Pick generator representatives from the kernel basis read backwards.
    pub reverse_representatives: bool,
}

impl BuildOptions {
    pub fn new(window: DegreeWindow) -> Self {
        Self { window, order: ConeOrder::Canonical, reverse_representatives: false }
    }

    pub fn for_fan(fan: &Fan) -> Self {
        Self::new(DegreeWindow::default_for(fan.dim()))
    }

    pub fn reversed(mut self) -> Self {
        self.order = ConeOrder::Reversed;
        self.reverse_representatives = true;
        self
    }
}

/// A built (shifted) minimal complex with the window it was built on.
#[derive(Clone, Debug)]
pub struct MinimalComplex {
    pub complex: FanComplex,
    pub window: DegreeWindow,
    /// Base cone and shift.
    pub base: (ConeId, i32),
}

/// Generator degrees per cone.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StalkReport {
    pub stalks: BTreeMap<ConeId, Vec<i32>>,
}

impl StalkReport {
    pub fn of(complex: &FanComplex) -> Self {
        let stalks = complex
            .components()
            .map(|(c, m)| {
                let mut g = m.generators.clone();
                g.sort_unstable();
                (c, g)
            })
            .collect();
        Self { stalks }
    }

    pub fn get(&self, c: ConeId) -> &[i32] {
        self.stalks.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Generator degree of the base component of a shifted minimal complex.
pub fn base_degree(n: usize, base_dim: usize, shift: i32) -> i32 {
    -(n as i32 - base_dim as i32 + shift)
}

/// `K_Φ`.
pub fn build_minimal(fan: Arc<Fan>, options: BuildOptions) -> Result<MinimalComplex> {
    let o = fan.origin_id();
    build_shifted_minimal(fan, o, 0, options)
}

/// `K_Φ[σ](k)`: rank one in degree `-(n - dim σ + k)` at `σ`, supported on
/// the star of `σ`.
pub fn build_shifted_minimal(fan: Arc<Fan>, sigma: ConeId, shift: i32, options: BuildOptions) -> Result<MinimalComplex> {
    let star = fan.star(sigma)?;
    let n = fan.dim();
    let base_dim = fan.cone(sigma).dim;
    let g = base_degree(n, base_dim, shift);
    let window = DegreeWindow::new(options.window.min.min(g), options.window.max);
    if g > window.max - 2 {
        return Err(Error::WindowExhausted { cone: sigma.0, degree: g });
    }

    let mut complex = FanComplex::new(fan.clone());
    complex.set_component(sigma, vec![g]);
    let top = star.iter().map(|c| fan.cone(*c).dim).max().unwrap_or(base_dim);
    for dim in base_dim + 1..=top {
        let mut layer: Vec<ConeId> = star.iter().copied().filter(|c| fan.cone(*c).dim == dim).collect();
        if options.order == ConeOrder::Reversed {
            layer.reverse();
        }
        let frozen = &complex;
        let built: Vec<(ConeId, FreeCover, Vec<ConeId>)> = layer
            .par_iter()
            .map(|&tau| {
                let mut bk = frozen.boundary_kernel(tau, window);
                if options.reverse_representatives {
                    reverse_pieces(&mut bk.kernel);
                }
                let cover = minimal_free_cover(&bk.kernel, &bk.ambient, tau.0)?;
                Ok((tau, cover, bk.facets))
            })
            .collect::<Result<Vec<_>>>()?;
        for (tau, cover, facets) in built {
            install(&mut complex, tau, &cover, &facets);
        }
    }
    Ok(MinimalComplex { complex, window, base: (sigma, shift) })
}

fn reverse_pieces(z: &mut GradedSubspaceFamily) {
    for v in z.pieces.values_mut() {
        v.reverse();
    }
}

/// Sets `M_τ` to the cover and the raw maps to the signed facet parts of the
/// representatives.
pub(crate) fn install(complex: &mut FanComplex, tau: ConeId, cover: &FreeCover, facets: &[ConeId]) {
    if cover.module.is_zero() {
        return;
    }
    complex.set_component(tau, cover.module.generators.clone());
    let fan = complex.fan.clone();
    let mut offsets_cache: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &rho) in facets.iter().enumerate() {
        let sign = q(fan.sign(tau, rho) as i64);
        let columns: Vec<SparseVec> = cover
            .module
            .generators
            .iter()
            .zip(&cover.representatives)
            .map(|(&d, rep)| {
                let offsets = offsets_cache.entry(d).or_insert_with(|| {
                    let mut o = vec![0];
                    for r in facets {
                        let last = *o.last().expect("nonempty");
                        o.push(last + complex.component(*r).dim_at(d));
                    }
                    o
                });
                rep.slice(offsets[i], offsets[i + 1]).scaled(&sign)
            })
            .collect();
        complex.set_map_from_columns(tau, rho, &columns);
    }
}

/// Outcome of checking the defining clauses of a (shifted) minimal complex.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MinimalityReport {
    /// Base component has the expected single generator and nothing sits
    /// outside the star or below the base.
    pub base_ok: bool,
    pub complex_ok: bool,
    pub locally_free: bool,
    pub not_exact: Vec<(ConeId, i32)>,
    /// Cones and degrees where reduction modulo the maximal ideal fails to
    /// be an isomorphism.
    pub not_minimal: Vec<(ConeId, i32)>,
}

impl MinimalityReport {
    pub fn passes(&self) -> bool {
        self.base_ok && self.complex_ok && self.locally_free && self.not_exact.is_empty() && self.not_minimal.is_empty()
    }
}

/// Checks the clauses of a minimal complex.
pub fn verify_minimality(m: &FanComplex, window: DegreeWindow) -> MinimalityReport {
    verify_shifted(m, m.fan.origin_id(), 0, window)
}

/// Checks the clauses of a shifted minimal complex based at `sigma`.
pub fn verify_shifted(m: &FanComplex, sigma: ConeId, shift: i32, window: DegreeWindow) -> MinimalityReport {
    let fan = m.fan.clone();
    let n = fan.dim();
    let base_dim = fan.cone(sigma).dim;
    let star = fan.star(sigma).unwrap_or_default();
    let base_ok = m.generators(sigma) == [base_degree(n, base_dim, shift)]
        && m.support().cones.iter().all(|c| star.contains(c));
    let complex_ok = m.check_complex().is_ok();
    let not_exact = m.check_locally_exact(window);
    let cones: Vec<ConeId> = star.iter().copied().filter(|c| *c != sigma).collect();
    let not_minimal: Vec<(ConeId, i32)> = cones
        .par_iter()
        .flat_map_iter(|&tau| mod_m_failures(m, tau, window).into_iter().map(move |d| (tau, d)))
        .collect();
    MinimalityReport { base_ok, complex_ok, locally_free: m.check_locally_free(), not_exact, not_minimal }
}

/// Degrees where `M_τ / m M_τ -> Z / m Z` is not an isomorphism.
fn mod_m_failures(m: &FanComplex, tau: ConeId, window: DegreeWindow) -> Vec<i32> {
    let bk = m.boundary_kernel(tau, window);
    let module = m.component(tau);
    let mut out = Vec::new();
    for d in window.degrees() {
        let mut ech: Echelon = maximal_ideal_part(&bk.kernel, &bk.ambient, d);
        let base = ech.dim();
        let expected = bk.kernel.dim_at(d) - base;
        let cols = m.map_into(tau, &bk.facets, d);
        let mut fresh = 0;
        let mut count = 0;
        for b in module.layout(d) {
            if b.poly_degree == 0 {
                count += 1;
                if ech.insert(cols[b.offset].clone()) {
                    fresh += 1;
                }
            }
        }
        if fresh != count || count != expected {
            out.push(d);
        }
    }
    out
}

/// Generator degrees of `H^{-n}` of a minimal complex, after checking that
/// the fan is complete or has convex support and that the complex is
/// acyclic outside the lowest degree.
pub fn ih_module(k: &MinimalComplex) -> Result<Vec<i32>> {
    let fan = &k.complex.fan;
    if !fan.is_complete() {
        let hull = Arc::new(fan.hull_fan().map_err(|_| Error::Precondition("support is not a pointed convex cone".into()))?);
        if hull.max_cone_dim() != fan.dim() {
            return Err(Error::Precondition("support is not full-dimensional".into()));
        }
        let map = subdivision_map(fan.clone(), hull)?;
        if !map.proper {
            return Err(Error::Precondition("fan is neither complete nor a subdivision of a convex cone".into()));
        }
    }
    let table = cohomology(k);
    let n = fan.dim() as i32;
    if let Some((p, d, v)) = table.nonzero_outside(-n).first() {
        return Err(Error::Certificate(format!("cohomology H^{p} in degree {d} has dimension {v}")));
    }
    let cover = k
        .complex
        .top_cohomology_cover(k.window)?
        .ok_or_else(|| Error::Certificate("lowest cohomology is not free on the window".into()))?;
    let mut g = cover.module.generators;
    g.sort_unstable();
    Ok(g)
}

pub fn cohomology(k: &MinimalComplex) -> CohomologyTable {
    k.complex.cohomology_degreewise(k.window)
}
