//! Direct image of a fan complex under a subdivision.
//!
//! For a target cone `σ` of dimension `i`, the component `(π_*M)_σ` is the
//! set of `m ∈ ⊕ M_τ` over the source cones `τ ⊆ σ` of dimension `i` whose
//! differential vanishes on source cones interior to `σ` and lies in the
//! already built components over the facets of `σ`. It is computed one
//! internal degree at a time and then certified free.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::complex::FanComplex;
use crate::error::{Error, Result};
use crate::exact::{q, Echelon, SparseVec, TrackedEchelon};
use crate::fan::{ConeId, FanMap};
use crate::graded::{
    kernel_degreewise, minimal_free_cover, DegreeWindow, FreeCover, GradedSubspaceFamily, ModuleSum,
};
use crate::poly::monomials;

/// One component of the direct image.
#[derive(Clone, Debug)]
pub struct PushforwardComponent {
    /// Source cones of the same dimension inside the target cone.
    pub preimage: Vec<ConeId>,
    pub ambient: ModuleSum,
    pub family: GradedSubspaceFamily,
    pub cover: FreeCover,
    pub free: bool,
    /// Images of the monomial basis of the cover, per degree.
    inclusion: BTreeMap<i32, Vec<SparseVec>>,
}

impl PushforwardComponent {
    fn new(preimage: Vec<ConeId>, ambient: ModuleSum, family: GradedSubspaceFamily, cover: FreeCover) -> Self {
        let free = cover.certifies_free(&family);
        let window = family.window;
        let module = &cover.module;
        let nvars = module.nvars();
        let mut inclusion: BTreeMap<i32, Vec<SparseVec>> = BTreeMap::new();
        for d in window.degrees() {
            let mut cols = Vec::with_capacity(module.dim_at(d));
            for b in module.layout(d) {
                if b.poly_degree == 0 {
                    cols.push(cover.representatives[b.generator].clone());
                    continue;
                }
                // t_k * μ' with k the first variable of μ
                let lower = module.layout(d - 2).into_iter().find(|l| l.generator == b.generator);
                let lower = lower.expect("lower block exists");
                let lower_basis = monomials(nvars, lower.poly_degree);
                for mu in monomials(nvars, b.poly_degree).monomials() {
                    let k = mu.0.iter().position(|&e| e > 0).expect("positive degree");
                    let mut rest = mu.clone();
                    rest.0[k] -= 1;
                    let prev = &inclusion[&(d - 2)][lower.offset + lower_basis.index_of(&rest)];
                    cols.push(prev.apply(&ambient.multiply_var(d - 2, k)));
                }
            }
            inclusion.insert(d, cols);
        }
        Self { preimage, ambient, family, cover, free, inclusion }
    }

    /// Images of the monomial basis of the cover in degree `d`.
    pub fn inclusion_columns(&self, d: i32) -> &[SparseVec] {
        self.inclusion.get(&d).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// `π_*M` on the target fan with its inclusion into `M`.
#[derive(Clone, Debug)]
pub struct PushforwardComplex {
    pub map: FanMap,
    pub source: FanComplex,
    pub complex: FanComplex,
    pub components: BTreeMap<ConeId, PushforwardComponent>,
    pub window: DegreeWindow,
}

/// Builds `π_*M` for a proper map.
pub fn pushforward(map: &FanMap, m: &FanComplex, window: DegreeWindow) -> Result<PushforwardComplex> {
    if !map.proper {
        return Err(Error::NotProper("the support of the source differs from the support of the target".into()));
    }
    let target = map.target.clone();
    let mut complex = FanComplex::new(target.clone());
    let mut components: BTreeMap<ConeId, PushforwardComponent> = BTreeMap::new();

    for dim in 0..=target.max_cone_dim() {
        let layer: Vec<ConeId> = target.cones_of_dim(dim).collect();
        let built = layer
            .par_iter()
            .map(|&sigma| {
                let comp = fiber_component(map, m, &components, sigma, window)?;
                if !comp.free {
                    return Err(Error::NotFree { cone: sigma.0, degree: first_mismatch(&comp) });
                }
                let raw = raw_differentials(map, m, &components, sigma, &comp)?;
                Ok((sigma, comp, raw))
            })
            .collect::<Result<Vec<_>>>()?;
        for (sigma, comp, raw) in built {
            complex.set_component(sigma, comp.cover.module.generators.clone());
            components.insert(sigma, comp);
            for (f, cols) in raw {
                complex.set_map_from_columns(sigma, f, &cols);
            }
        }
    }
    Ok(PushforwardComplex { map: map.clone(), source: m.clone(), complex, components, window })
}

fn first_mismatch(comp: &PushforwardComponent) -> i32 {
    let window = comp.family.window;
    window
        .degrees()
        .find(|&d| comp.cover.module.dim_at(d) != comp.family.dim_at(d))
        .unwrap_or(window.max)
}

/// Computes the fiber-product family at `sigma` and its minimal cover.
fn fiber_component(
    map: &FanMap,
    m: &FanComplex,
    built: &BTreeMap<ConeId, PushforwardComponent>,
    sigma: ConeId,
    window: DegreeWindow,
) -> Result<PushforwardComponent> {
    let target = &map.target;
    let source = &map.source;
    let ring = target.cone(sigma).ring.clone();
    let preimage = map.preimage_cones(sigma);
    let mut ambient = ModuleSum::new(ring.clone());
    for &tau in &preimage {
        let r = ring.restriction_to(&source.cone(tau).ring)?;
        ambient.push(m.component(tau), &r);
    }

    // faces one dimension down that are interior to sigma
    let mut interior: Vec<ConeId> = Vec::new();
    for &tau in &preimage {
        for &phi in source.facets(tau) {
            if map.assignment[phi.0] == sigma && !interior.contains(&phi) {
                interior.push(phi);
            }
        }
    }
    interior.sort();
    let over: Vec<&PushforwardComponent> = target.facets(sigma).iter().map(|f| &built[f]).collect();

    // unknowns: x over the preimage, then y in each facet component
    let kernel = kernel_degreewise(window, |d| {
        let mut cols = m.block_matrix(&preimage, &interior, d);
        let mut row_offset: usize = interior.iter().map(|c| m.component(*c).dim_at(d)).sum();
        let mut y_cols = Vec::new();
        for fc in &over {
            let dm = m.block_matrix(&preimage, &fc.preimage, d);
            for (c, extra) in cols.iter_mut().zip(dm) {
                *c = c.add(&extra.shifted(row_offset));
            }
            y_cols.extend(fc.inclusion_columns(d).iter().map(|v| v.neg().shifted(row_offset)));
            row_offset += fc.ambient.dim_at(d);
        }
        cols.extend(y_cols);
        cols
    });
    let mut pieces = BTreeMap::new();
    for d in window.degrees() {
        let x_len = ambient.dim_at(d);
        let mut ech = Echelon::new();
        let mut basis = Vec::new();
        for v in kernel.piece(d) {
            let x = v.slice(0, x_len);
            if ech.insert(x.clone()) {
                basis.push(x);
            }
        }
        pieces.insert(d, basis);
    }
    let family = GradedSubspaceFamily { window, pieces };
    let cover = minimal_free_cover(&family, &ambient, sigma.0)?;
    Ok(PushforwardComponent::new(preimage, ambient, family, cover))
}

/// Raw maps from the new component to each facet component: the
/// differential of each generator, in the basis of the facet component.
fn raw_differentials(
    map: &FanMap,
    m: &FanComplex,
    built: &BTreeMap<ConeId, PushforwardComponent>,
    sigma: ConeId,
    comp: &PushforwardComponent,
) -> Result<Vec<(ConeId, Vec<SparseVec>)>> {
    let target = &map.target;
    let mut out = Vec::new();
    for &f in target.facets(sigma) {
        let fc = &built[&f];
        let sign = q(target.sign(sigma, f) as i64);
        let mut cols = Vec::with_capacity(comp.cover.module.rank());
        for (&d, rep) in comp.cover.module.generators.iter().zip(&comp.cover.representatives) {
            let image = rep.apply(&m.block_matrix(&comp.preimage, &fc.preimage, d));
            let solver = TrackedEchelon::from_columns(fc.inclusion_columns(d));
            let y = solver.preimage(&image).ok_or_else(|| {
                Error::Certificate(format!("differential of cone {sigma} leaves the direct image over cone {f}"))
            })?;
            cols.push(y.scaled(&sign));
        }
        out.push((f, cols));
    }
    Ok(out)
}

/// Results of the checks on a direct image.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PushforwardCertificate {
    pub complex_ok: bool,
    pub locally_free: bool,
    pub subcomplex: bool,
    pub not_exact: Vec<(ConeId, i32)>,
    /// Bidegrees where the inclusion fails to induce an isomorphism.
    pub not_quasi_isomorphic: Vec<(i32, i32)>,
}

impl PushforwardCertificate {
    pub fn passes(&self) -> bool {
        self.complex_ok
            && self.locally_free
            && self.subcomplex
            && self.not_exact.is_empty()
            && self.not_quasi_isomorphic.is_empty()
    }
}

impl PushforwardComplex {
    /// Inclusion `(π_*M)^p_d -> M^p_d` as columns.
    pub fn inclusion(&self, p: i32, d: i32) -> Vec<SparseVec> {
        let m = &self.source;
        let source_cones = m.cones_in_degree(p);
        let mut offset: BTreeMap<ConeId, usize> = BTreeMap::new();
        let mut o = 0;
        for c in &source_cones {
            offset.insert(*c, o);
            o += m.component(*c).dim_at(d);
        }
        let mut cols = Vec::new();
        for sigma in self.complex.cones_in_degree(p) {
            let comp = &self.components[&sigma];
            let part_offsets = comp.ambient.offsets(d);
            for v in comp.inclusion_columns(d) {
                let mut col = SparseVec::new();
                for (i, tau) in comp.preimage.iter().enumerate() {
                    let block = v.slice(part_offsets[i], part_offsets[i + 1]);
                    if let Some(off) = offset.get(tau) {
                        col = col.add(&block.shifted(*off));
                    }
                }
                cols.push(col);
            }
        }
        cols
    }
}

/// Local exactness, local freeness and the quasi-isomorphism `π_*M -> M`.
pub fn verify_pushforward(p: &PushforwardComplex) -> PushforwardCertificate {
    let window = p.window;
    let complex_ok = p.complex.check_complex().is_ok();
    let locally_free = p.components.values().all(|c| c.free);
    let not_exact = p.complex.check_locally_exact(window);
    let n = p.complex.fan.dim() as i32;

    let bidegrees: Vec<(i32, i32)> = (-n..=0).flat_map(|q| window.degrees().map(move |d| (q, d))).collect();
    let results: Vec<((i32, i32), bool, bool)> = bidegrees
        .par_iter()
        .map(|&(q, d)| {
            let incl = p.inclusion(q, d);
            // subcomplex: d_M ∘ ι = ι ∘ d_P
            let lhs: Vec<SparseVec> = incl.iter().map(|v| v.apply(&p.source.differential(q, d))).collect();
            let next = p.inclusion(q + 1, d);
            let rhs: Vec<SparseVec> =
                p.complex.differential(q, d).iter().map(|v| v.apply(&next)).collect();
            let commutes = lhs == rhs;
            let iso = induces_isomorphism(p, q, d, &incl);
            ((q, d), commutes, iso)
        })
        .collect();
    let subcomplex = results.iter().all(|r| r.1);
    let not_quasi_isomorphic = results.iter().filter(|r| !r.2).map(|r| r.0).collect();
    PushforwardCertificate { complex_ok, locally_free, subcomplex, not_exact, not_quasi_isomorphic }
}

/// Rank of `H(ι)` at one bidegree equals both cohomology dimensions.
fn induces_isomorphism(p: &PushforwardComplex, q: i32, d: i32, incl: &[SparseVec]) -> bool {
    let dp = TrackedEchelon::from_columns(&p.complex.differential(q, d));
    let dp_prev = Echelon::from_vectors(&p.complex.differential(q - 1, d)).dim();
    let h_p = dp.kernel().len() - dp_prev;
    let dm = TrackedEchelon::from_columns(&p.source.differential(q, d));
    let boundaries = Echelon::from_vectors(&p.source.differential(q - 1, d));
    let h_m = dm.kernel().len() - boundaries.dim();
    let mut ech = boundaries;
    let base = ech.dim();
    for z in dp.kernel() {
        ech.insert(z.apply(incl));
    }
    let rank = ech.dim() - base;
    h_p == h_m && rank == h_p
}
