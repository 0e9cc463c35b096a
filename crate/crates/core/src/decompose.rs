//! Splitting a locally free, locally exact fan complex into shifted minimal
//! complexes `K[σ](k)`.
//!
//! Two routes are provided. [`decomposition_multiplicities`] reads the
//! multiplicities off the generator degrees alone, subtracting the stalks of
//! the summands already found. [`peel_summand`] changes bases cone by cone
//! until the complex is block diagonal with a summand supported on the star
//! of one cone; [`decompose`] iterates it.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::complex::FanComplex;
use crate::error::{Error, Result};
use crate::exact::{SparseVec, TrackedEchelon};
use crate::fan::{ConeId, Fan, FanMap};
use crate::graded::{split_surjection, BasisChange, DegreeWindow, GradedSubspaceFamily, PolyMatrix};
use crate::minimal::{build_minimal, build_shifted_minimal, BuildOptions, ConeOrder, StalkReport};
use crate::poly::Poly;
use crate::pushforward::{pushforward, verify_pushforward, PushforwardCertificate};

/// Multiplicity of each summand `K[σ](k)`.
pub type Multiplicities = BTreeMap<(ConeId, i32), usize>;

/// Shift `k` of the summand based at a cone of dimension `dim` whose
/// generator sits in degree `d`.
pub fn shift_for(n: usize, dim: usize, d: i32) -> i32 {
    -(n as i32) + dim as i32 - d
}

/// Greedy multiplicities: walking up by cone dimension, every generator
/// not yet accounted for starts a new summand.
pub fn decomposition_multiplicities(m: &FanComplex, window: DegreeWindow) -> Result<Multiplicities> {
    let fan = m.fan.clone();
    let n = fan.dim();
    let mut residual: BTreeMap<ConeId, BTreeMap<i32, i64>> = BTreeMap::new();
    for (c, module) in m.components() {
        let r = residual.entry(c).or_default();
        for &g in &module.generators {
            *r.entry(g).or_default() += 1;
        }
    }
    let mut cache: HashMap<(ConeId, i32), StalkReport> = HashMap::new();
    let mut out = Multiplicities::new();
    for dim in 0..=fan.max_cone_dim() {
        for sigma in fan.cones_of_dim(dim) {
            let here = residual.get(&sigma).cloned().unwrap_or_default();
            for (&d, &count) in &here {
                if count < 0 {
                    return Err(Error::NegativeResidual { cone: sigma.0, degree: d });
                }
                if count == 0 {
                    continue;
                }
                let k = shift_for(n, dim, d);
                let stalks = match cache.get(&(sigma, k)) {
                    Some(s) => s.clone(),
                    None => {
                        let built = build_shifted_minimal(fan.clone(), sigma, k, BuildOptions::new(window))?;
                        let s = StalkReport::of(&built.complex);
                        cache.insert((sigma, k), s.clone());
                        s
                    }
                };
                for (c, gens) in &stalks.stalks {
                    let r = residual.entry(*c).or_default();
                    for &g in gens {
                        *r.entry(g).or_default() -= count;
                    }
                }
                out.insert((sigma, k), count as usize);
            }
        }
    }
    for (c, r) in &residual {
        if let Some((d, _)) = r.iter().find(|(_, v)| **v != 0) {
            return Err(Error::NegativeResidual { cone: c.0, degree: *d });
        }
    }
    Ok(out)
}

/// Result of splitting off the summands based at one cone.
#[derive(Clone, Debug)]
pub struct Peel {
    pub base: ConeId,
    /// One `(base, k)` per generator of the base component.
    pub summands: Vec<(ConeId, i32)>,
    /// The split-off part, a direct sum of shifted minimal complexes.
    pub split: FanComplex,
    pub complement: FanComplex,
}

/// Splits `M` as `(⊕_j K[τ](k_j)) ⊕ N` where the `k_j` come from the
/// generators of `M_τ`. Every proper face of `τ` must carry the zero module.
pub fn peel_summand(m: &FanComplex, tau: ConeId, window: DegreeWindow) -> Result<Peel> {
    let fan = m.fan.clone();
    let n = fan.dim();
    if let Some(face) = fan.faces(tau).iter().find(|f| **f != tau && !m.generators(**f).is_empty()) {
        return Err(Error::Precondition(format!("cone {face} below the base {tau} is nonzero")));
    }
    let base_gens = m.generators(tau).to_vec();
    if base_gens.is_empty() {
        return Err(Error::Precondition(format!("component at cone {tau} is zero")));
    }
    let dim = fan.cone(tau).dim;
    let summands: Vec<(ConeId, i32)> = base_gens.iter().map(|&d| (tau, shift_for(n, dim, d))).collect();

    // working copy: components over processed cones are in the new bases,
    // ordered with the summand generators first
    let mut work = m.clone();
    let mut k_count: BTreeMap<ConeId, usize> = BTreeMap::new();
    k_count.insert(tau, base_gens.len());

    let mut star = fan.star(tau)?;
    star.sort_by_key(|c| (fan.cone(*c).dim, *c));
    for &sigma in star.iter().filter(|c| **c != tau) {
        let facets = fan.facets(sigma).to_vec();
        let old = work.component(sigma);
        if old.is_zero() {
            continue;
        }
        let bk = work.boundary_kernel(sigma, window);
        let split_coords = |d: i32| -> Vec<bool> {
            // true for coordinates belonging to summand generators
            let mut mask = Vec::new();
            for f in &facets {
                let module = work.component(*f);
                let k = k_count.get(f).copied().unwrap_or(0);
                for b in module.layout(d) {
                    mask.extend(std::iter::repeat_n(b.generator < k, b.len));
                }
            }
            mask
        };
        let mut z_k = GradedSubspaceFamily::zero(window);
        let mut z_n = GradedSubspaceFamily::zero(window);
        let codim2: Vec<ConeId> = {
            let mut c = fan.codim2_faces(sigma);
            c.retain(|x| !work.generators(*x).is_empty());
            c
        };
        for d in window.degrees() {
            let cols = work.block_matrix(&facets, &codim2, d);
            let mask = split_coords(d);
            z_k.pieces.insert(d, masked_kernel(&cols, &mask, true));
            z_n.pieces.insert(d, masked_kernel(&cols, &mask, false));
            if z_k.dim_at(d) + z_n.dim_at(d) != bk.kernel.dim_at(d) {
                return Err(Error::Certificate(format!("boundary kernel at cone {sigma} does not split in degree {d}")));
            }
        }
        let split = split_surjection(&old, &bk.ambient, |d| work.map_into(sigma, &facets, d), &z_k, &z_n, sigma.0)?;
        let kc = split.k_part.len();
        let change = BasisChange::new(old.clone(), split.generators().cloned().collect());
        if !change.is_invertible(window) {
            return Err(Error::Certificate(format!("new generators at cone {sigma} are not a basis")));
        }
        rebase(&mut work, sigma, &change)?;
        k_count.insert(sigma, kc);
    }

    let (split, complement) = separate(&work, &k_count)?;
    Ok(Peel { base: tau, summands, split, complement })
}

/// Basis of the kernel of `cols` among vectors supported on the masked
/// coordinates (or on the others).
fn masked_kernel(cols: &[SparseVec], mask: &[bool], keep: bool) -> Vec<SparseVec> {
    let index: Vec<usize> = (0..mask.len()).filter(|&i| mask[i] == keep).collect();
    let sub: Vec<SparseVec> = index.iter().map(|&i| cols.get(i).cloned().unwrap_or_default()).collect();
    TrackedEchelon::from_columns(&sub)
        .kernel()
        .iter()
        .map(|v| SparseVec::from_pairs(v.iter().map(|(i, c)| (index[i], c.clone()))))
        .collect()
}

/// Replaces `M_σ` by the module on the new generators and rewrites the maps
/// out of and into `σ`.
fn rebase(work: &mut FanComplex, sigma: ConeId, change: &BasisChange) -> Result<()> {
    let fan = work.fan.clone();
    let new_gens = change.new.generators.clone();
    let mut out_maps = Vec::new();
    for &rho in fan.facets(sigma) {
        let Some(raw) = work.raw_map(sigma, rho) else { continue };
        let cols: Vec<SparseVec> = new_gens
            .iter()
            .enumerate()
            .map(|(g, &d)| change.generator(g).apply(&raw.degree_matrix(d)))
            .collect();
        out_maps.push((rho, cols));
    }
    let mut in_maps = Vec::new();
    for &xi in fan.cofacets(sigma) {
        let Some(raw) = work.raw_map(xi, sigma) else { continue };
        let source = work.component(xi);
        let mut cols = Vec::with_capacity(source.rank());
        for (j, &d) in source.generators.iter().enumerate() {
            let v = change
                .to_new(d, &raw.column(j))
                .ok_or_else(|| Error::Certificate(format!("map into cone {sigma} leaves its new basis")))?;
            cols.push(v);
        }
        in_maps.push((xi, cols));
    }
    work.set_component(sigma, new_gens);
    for (rho, cols) in out_maps {
        work.set_map_from_columns(sigma, rho, &cols);
    }
    for (xi, cols) in in_maps {
        work.set_map_from_columns(xi, sigma, &cols);
    }
    Ok(())
}

/// Splits a block diagonal complex into the part on the first `k_count`
/// generators of each cone and the rest.
fn separate(work: &FanComplex, k_count: &BTreeMap<ConeId, usize>) -> Result<(FanComplex, FanComplex)> {
    let fan = work.fan.clone();
    let mut k = FanComplex::new(fan.clone());
    let mut rest = FanComplex::new(fan.clone());
    let kc = |c: ConeId| k_count.get(&c).copied().unwrap_or(0);
    for (c, module) in work.components() {
        k.set_component(c, module.generators[..kc(c)].to_vec());
        rest.set_component(c, module.generators[kc(c)..].to_vec());
    }
    for ((s, t), raw) in work.maps() {
        let (ks, kt) = (kc(s), kc(t));
        let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| -> Vec<Vec<Poly>> {
            raw.entries[rows].iter().map(|row| row[cols.clone()].to_vec()).collect()
        };
        let (rs, rt) = (raw.source.rank(), raw.target.rank());
        let off_diagonal = block(0..kt, ks..rs).into_iter().chain(block(kt..rt, 0..ks)).flatten().any(|p| !p.is_zero());
        if off_diagonal {
            return Err(Error::Certificate(format!("map from cone {s} to cone {t} is not block diagonal")));
        }
        let restriction = fan.restriction(s, t);
        let kmap = PolyMatrix::new(k.component(s), k.component(t), restriction.clone(), block(0..kt, 0..ks))?;
        k.set_map(s, t, kmap);
        let nmap = PolyMatrix::new(rest.component(s), rest.component(t), restriction, block(kt..rt, ks..rs))?;
        rest.set_map(s, t, nmap);
    }
    Ok((k, rest))
}

/// Full splitting by repeated peeling at a lowest nonzero cone.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub peels: Vec<Peel>,
    pub multiplicities: Multiplicities,
}

pub fn decompose(m: &FanComplex, window: DegreeWindow) -> Result<Decomposition> {
    decompose_with(m, window, ConeOrder::Canonical)
}

/// Like [`decompose`]; `order` picks the first or the last of the lowest
/// nonzero cones at each step.
pub fn decompose_with(m: &FanComplex, window: DegreeWindow, order: ConeOrder) -> Result<Decomposition> {
    let mut current = m.clone();
    let mut peels = Vec::new();
    let mut multiplicities = Multiplicities::new();
    while let Some(tau) = lowest_nonzero(&current, order) {
        let peel = peel_summand(&current, tau, window)?;
        for s in &peel.summands {
            *multiplicities.entry(*s).or_default() += 1;
        }
        current = peel.complement.clone();
        peels.push(peel);
    }
    Ok(Decomposition { peels, multiplicities })
}

fn lowest_nonzero(m: &FanComplex, order: ConeOrder) -> Option<ConeId> {
    let dim = m.components().map(|(c, _)| m.fan.cone(c).dim).min()?;
    let mut lowest = m.components().map(|(c, _)| c).filter(|c| m.fan.cone(*c).dim == dim);
    match order {
        ConeOrder::Canonical => lowest.next(),
        ConeOrder::Reversed => lowest.last(),
    }
}

/// Checks of one decomposition against independent constructions.
#[derive(Clone, Debug)]
pub struct DecompositionCheck {
    /// Greedy and peeled multiplicities agree.
    pub routes_agree: bool,
    /// Each split-off part has the stalks of the matching sum of shifted
    /// minimal complexes.
    pub summands_match: bool,
    /// Every split-off part and every intermediate complement squares to
    /// zero and is locally exact.
    pub parts_valid: bool,
    /// The last complement is zero.
    pub exhausted: bool,
}

impl DecompositionCheck {
    pub fn passes(&self) -> bool {
        self.routes_agree && self.summands_match && self.parts_valid && self.exhausted
    }
}

pub fn check_decomposition(m: &FanComplex, d: &Decomposition, window: DegreeWindow) -> Result<DecompositionCheck> {
    let greedy = decomposition_multiplicities(m, window)?;
    let routes_agree = greedy == d.multiplicities;
    let mut summands_match = true;
    let mut parts_valid = true;
    let valid = |c: &FanComplex| c.check_complex().is_ok() && c.check_locally_free() && c.check_locally_exact(window).is_empty();
    for peel in &d.peels {
        parts_valid &= valid(&peel.split) && valid(&peel.complement);
        let mut expected: BTreeMap<ConeId, Vec<i32>> = BTreeMap::new();
        for &(c, k) in &peel.summands {
            let built = build_shifted_minimal(m.fan.clone(), c, k, BuildOptions::new(window))?;
            for (cone, gens) in StalkReport::of(&built.complex).stalks {
                expected.entry(cone).or_default().extend(gens);
            }
        }
        let mut actual = StalkReport::of(&peel.split).stalks;
        for v in expected.values_mut().chain(actual.values_mut()) {
            v.sort();
        }
        expected.retain(|_, v| !v.is_empty());
        actual.retain(|_, v| !v.is_empty());
        summands_match &= expected == actual;
    }
    let exhausted = d.peels.last().map_or(m.is_zero(), |p| p.complement.is_zero());
    Ok(DecompositionCheck { routes_agree, summands_match, parts_valid, exhausted })
}

/// The direct image of `K` under a subdivision and its splitting.
#[derive(Clone, Debug)]
pub struct TheoremReport {
    pub pushforward: PushforwardCertificate,
    pub multiplicities: Multiplicities,
    pub check: DecompositionCheck,
    /// `K` of the target appears exactly once and nothing else is based at
    /// the origin.
    pub base_ok: bool,
    /// Stalks of the direct image.
    pub stalks: StalkReport,
}

impl TheoremReport {
    pub fn passes(&self) -> bool {
        self.pushforward.passes() && self.check.passes() && self.base_ok
    }
}

pub fn decomposition_theorem_report(map: &FanMap, window: DegreeWindow) -> Result<TheoremReport> {
    decomposition_theorem_report_with(map, BuildOptions::new(window))
}

/// The report with the cone order of `options` used both for building `K`
/// and for choosing where to peel.
pub fn decomposition_theorem_report_with(map: &FanMap, options: BuildOptions) -> Result<TheoremReport> {
    let window = options.window;
    let source: Arc<Fan> = map.source.clone();
    let k = build_minimal(source, options)?;
    let p = pushforward(map, &k.complex, window)?;
    let certificate = verify_pushforward(&p);
    let d = decompose_with(&p.complex, window, options.order)?;
    let check = check_decomposition(&p.complex, &d, window)?;
    let o = map.target.origin_id();
    let base_ok = d.multiplicities.get(&(o, 0)) == Some(&1)
        && d.multiplicities.keys().filter(|(c, _)| *c == o).count() == 1;
    Ok(TheoremReport { pushforward: certificate, multiplicities: d.multiplicities, check, base_ok, stalks: StalkReport::of(&p.complex) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::subdivision_map;

    fn quadrant() -> Fan {
        Fan::single_cone(2, vec![vec![1, 0], vec![0, 1]]).unwrap()
    }

    fn blowup() -> Fan {
        Fan::new(2, vec![vec![1, 0], vec![1, 1], vec![0, 1]], vec![vec![0, 1], vec![1, 2]]).unwrap()
    }

    #[test]
    fn minimal_complex_is_one_summand() {
        let fan = Arc::new(quadrant());
        let window = DegreeWindow::default_for(2);
        let k = build_minimal(fan.clone(), BuildOptions::new(window)).unwrap();
        let greedy = decomposition_multiplicities(&k.complex, window).unwrap();
        assert_eq!(greedy, Multiplicities::from([((fan.origin_id(), 0), 1)]));
        let d = decompose(&k.complex, window).unwrap();
        assert_eq!(d.multiplicities, greedy);
        assert!(d.peels.last().unwrap().complement.is_zero());
    }

    #[test]
    fn shifted_complex_is_recovered() {
        let fan = Arc::new(quadrant());
        let top = fan.maximal_cones()[0];
        let window = DegreeWindow::default_for(2);
        let k = build_shifted_minimal(fan.clone(), top, -2, BuildOptions::new(window)).unwrap();
        let d = decompose(&k.complex, window).unwrap();
        assert_eq!(d.multiplicities, Multiplicities::from([((top, -2), 1)]));
        let ray = fan.cones_of_dim(1).next().unwrap();
        let k = build_shifted_minimal(fan.clone(), ray, 1, BuildOptions::new(window)).unwrap();
        let greedy = decomposition_multiplicities(&k.complex, window).unwrap();
        assert_eq!(greedy, Multiplicities::from([((ray, 1), 1)]));
    }

    #[test]
    fn direct_sum_splits_back() {
        let fan = Arc::new(quadrant());
        let window = DegreeWindow::default_for(2);
        let k = build_minimal(fan.clone(), BuildOptions::new(window)).unwrap();
        let top = fan.maximal_cones()[0];
        let s = build_shifted_minimal(fan.clone(), top, 0, BuildOptions::new(window)).unwrap();
        let sum = k.complex.direct_sum(&s.complex).direct_sum(&k.complex);
        let d = decompose(&sum, window).unwrap();
        let expected = Multiplicities::from([((fan.origin_id(), 0), 2), ((top, 0), 1)]);
        assert_eq!(d.multiplicities, expected);
        let check = check_decomposition(&sum, &d, window).unwrap();
        assert!(check.passes(), "{check:?}");
        let reversed = decompose_with(&sum, window, ConeOrder::Reversed).unwrap();
        assert_eq!(reversed.multiplicities, d.multiplicities);
    }

    #[test]
    fn blowup_of_quadrant() {
        let map = subdivision_map(Arc::new(blowup()), Arc::new(quadrant())).unwrap();
        let report = decomposition_theorem_report(&map, DegreeWindow::default_for(2)).unwrap();
        let top = map.target.maximal_cones()[0];
        let expected = Multiplicities::from([((map.target.origin_id(), 0), 1), ((top, 0), 1)]);
        assert_eq!(report.multiplicities, expected);
        assert!(report.passes(), "{report:?}");
    }

    #[test]
    fn peel_requires_lowest_cone() {
        let fan = Arc::new(quadrant());
        let window = DegreeWindow::default_for(2);
        let k = build_minimal(fan.clone(), BuildOptions::new(window)).unwrap();
        let top = fan.maximal_cones()[0];
        assert!(matches!(peel_summand(&k.complex, top, window), Err(Error::Precondition(_))));
    }
}
