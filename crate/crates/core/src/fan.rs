//! Rational polyhedral cones and fans.
//!
//! A fan is stored in canonical form: rays sorted lexicographically, cones
//! sorted by `(dim, sorted ray list)`, with the zero cone at id 0. Each cone
//! carries its H-representation, facet list, coordinate ring and the
//! incidence signs towards its facets, all computed once at construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exact::{dense, Q};
use crate::graded::{ConeRing, Restriction};

/// Index of a cone in its fan's canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConeId(pub usize);

impl fmt::Display for ConeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Primitive integer vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RayVector(Vec<i64>);

impl RayVector {
    /// Normalizes to the primitive vector in the same direction. The flag is
    /// set when the input was not primitive.
    pub fn new(coords: Vec<i64>) -> Result<(Self, bool)> {
        if coords.iter().all(|&c| c == 0) {
            return Err(Error::InvalidFan("zero ray".into()));
        }
        let g = coords.iter().fold(0i64, |g, &c| num_integer::gcd(g, c));
        if g == 1 {
            Ok((RayVector(coords), false))
        } else {
            Ok((RayVector(coords.iter().map(|c| c / g).collect()), true))
        }
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn to_q(&self) -> Vec<Q> {
        dense::to_q(&self.0)
    }
}

/// A cone of a fan.
#[derive(Clone, Debug)]
pub struct Cone {
    pub id: ConeId,
    /// Sorted indices into the fan's ray list.
    pub rays: Vec<usize>,
    pub dim: usize,
    /// Lexicographically-first maximal independent subset of `rays`.
    pub basis: Vec<usize>,
    /// Integer functionals cutting out `span(cone)`.
    pub equations: Vec<Vec<i64>>,
    /// One inward facet normal per entry of the fan's facet list for this cone.
    pub inequalities: Vec<Vec<i64>>,
    pub ring: Arc<ConeRing>,
}

impl Cone {
    pub fn is_simplicial(&self) -> bool {
        self.rays.len() == self.dim
    }
}

#[derive(Clone, Debug)]
struct FaceInfo {
    dim: usize,
    equations: Vec<Vec<i64>>,
    /// (facet ray set, inward normal)
    facets: Vec<(Vec<usize>, Vec<i64>)>,
}

/// A rational polyhedral fan.
#[derive(Clone, Debug)]
pub struct Fan {
    dim: usize,
    rays: Vec<RayVector>,
    cones: Vec<Cone>,
    by_rays: HashMap<Vec<usize>, ConeId>,
    facets: Vec<Vec<ConeId>>,
    cofacets: Vec<Vec<ConeId>>,
    faces: Vec<Vec<ConeId>>,
    signs: HashMap<(ConeId, ConeId), i32>,
    normalized_rays: bool,
    restrictions: Arc<Mutex<HashMap<(ConeId, ConeId), Arc<Restriction>>>>,
}

impl Fan {
    /// Face closure of the listed cones, validated against the fan axioms.
    ///
    /// `cones` refer to positions in `rays`. Non-primitive rays are
    /// normalized and reported through [`Fan::had_nonprimitive_rays`].
    pub fn new(dim: usize, rays: Vec<Vec<i64>>, cones: Vec<Vec<usize>>) -> Result<Fan> {
        let mut normalized = false;
        let mut primitive = Vec::with_capacity(rays.len());
        for r in rays {
            if r.len() != dim {
                return Err(Error::InvalidFan(format!("ray {r:?} does not have {dim} coordinates")));
            }
            let (v, flag) = RayVector::new(r)?;
            normalized |= flag;
            primitive.push(v);
        }
        for c in &cones {
            if let Some(&bad) = c.iter().find(|&&i| i >= primitive.len()) {
                return Err(Error::InvalidFan(format!("cone refers to unknown ray {bad}")));
            }
        }

        // keep only used rays, sorted lexicographically
        let used: BTreeSet<usize> = cones.iter().flatten().copied().collect();
        let mut order: Vec<usize> = used.into_iter().collect();
        order.sort_by(|&a, &b| primitive[a].cmp(&primitive[b]));
        for w in order.windows(2) {
            if primitive[w[0]] == primitive[w[1]] {
                return Err(Error::InvalidFan(format!("duplicate ray {:?}", primitive[w[0]].coords())));
            }
        }
        let remap: HashMap<usize, usize> = order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let rays: Vec<RayVector> = order.iter().map(|&i| primitive[i].clone()).collect();
        let vectors: Vec<Vec<Q>> = rays.iter().map(RayVector::to_q).collect();

        let mut listed: Vec<Vec<usize>> = cones
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.iter().map(|i| remap[i]).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        listed.sort();
        listed.dedup();

        let mut memo: HashMap<Vec<usize>, FaceInfo> = HashMap::new();
        for c in &listed {
            analyze_cone(c, &vectors, dim, &mut memo)?;
            // every generator must be an extreme ray
            let closure = face_closure(c, &memo);
            for r in c {
                if !closure.contains(&vec![*r]) {
                    return Err(Error::NonConvexCone { rays: original_ids(c, &order) });
                }
            }
        }

        // pairwise intersections of listed cones
        for (i, a) in listed.iter().enumerate() {
            for b in listed.iter().skip(i + 1) {
                if !intersects_properly(a, b, dim, &memo) {
                    return Err(Error::ImproperIntersection {
                        first: original_ids(a, &order),
                        second: original_ids(b, &order),
                    });
                }
            }
        }

        let mut all: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
        all.insert((0, Vec::new()));
        for c in &listed {
            for f in face_closure(c, &memo) {
                let d = memo[&f].dim;
                all.insert((d, f));
            }
        }
        Self::assemble(dim, rays, vectors, all.into_iter().collect(), &memo, normalized)
    }

    fn assemble(
        dim: usize,
        rays: Vec<RayVector>,
        vectors: Vec<Vec<Q>>,
        sorted: Vec<(usize, Vec<usize>)>,
        memo: &HashMap<Vec<usize>, FaceInfo>,
        normalized_rays: bool,
    ) -> Result<Fan> {
        let by_rays: HashMap<Vec<usize>, ConeId> =
            sorted.iter().enumerate().map(|(i, (_, r))| (r.clone(), ConeId(i))).collect();
        let mut cones = Vec::with_capacity(sorted.len());
        let mut facets = Vec::with_capacity(sorted.len());
        for (i, (d, r)) in sorted.iter().enumerate() {
            let info = if r.is_empty() { empty_face(dim) } else { memo[r].clone() };
            let basis = lex_first_basis(r, &vectors);
            let ring = Arc::new(ConeRing::new(dim, basis.iter().map(|&k| vectors[k].clone()).collect()));
            let mut fs: Vec<(ConeId, Vec<i64>)> =
                info.facets.iter().map(|(f, normal)| (by_rays[f], normal.clone())).collect();
            fs.sort();
            facets.push(fs.iter().map(|(id, _)| *id).collect::<Vec<_>>());
            cones.push(Cone {
                id: ConeId(i),
                rays: r.clone(),
                dim: *d,
                basis,
                equations: info.equations.clone(),
                inequalities: fs.into_iter().map(|(_, n)| n).collect(),
                ring,
            });
        }
        let mut cofacets = vec![Vec::new(); cones.len()];
        for (i, fs) in facets.iter().enumerate() {
            for f in fs {
                cofacets[f.0].push(ConeId(i));
            }
        }
        let faces: Vec<Vec<ConeId>> = cones
            .iter()
            .map(|c| {
                let mut out: Vec<ConeId> = cones
                    .iter()
                    .filter(|t| t.rays.iter().all(|r| c.rays.binary_search(r).is_ok()) && by_rays.contains_key(&t.rays))
                    .filter(|t| is_face_rays(&t.rays, &c.rays, memo))
                    .map(|t| t.id)
                    .collect();
                out.sort();
                out
            })
            .collect();

        let mut fan = Fan {
            dim,
            rays,
            cones,
            by_rays,
            facets,
            cofacets,
            faces,
            signs: HashMap::new(),
            normalized_rays,
            restrictions: Arc::new(Mutex::new(HashMap::new())),
        };
        let mut signs = HashMap::new();
        for c in &fan.cones {
            for &t in &fan.facets[c.id.0] {
                signs.insert((c.id, t), fan.compute_sign(c.id, t));
            }
        }
        fan.signs = signs;
        Ok(fan)
    }

    /// The fan `<cone>` of one cone and its faces.
    pub fn single_cone(dim: usize, rays: Vec<Vec<i64>>) -> Result<Fan> {
        let all: Vec<usize> = (0..rays.len()).collect();
        Fan::new(dim, rays, vec![all])
    }

    /// The fan consisting of the origin alone.
    pub fn origin(dim: usize) -> Fan {
        Fan::new(dim, Vec::new(), Vec::new()).expect("the zero fan is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rays(&self) -> &[RayVector] {
        &self.rays
    }

    pub fn ray_vector(&self, i: usize) -> Vec<Q> {
        self.rays[i].to_q()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn len(&self) -> usize {
        self.cones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }

    pub fn cone(&self, id: ConeId) -> &Cone {
        &self.cones[id.0]
    }

    pub fn origin_id(&self) -> ConeId {
        ConeId(0)
    }

    pub fn had_nonprimitive_rays(&self) -> bool {
        self.normalized_rays
    }

    /// Cone with exactly this (sorted) ray set.
    pub fn find(&self, rays: &[usize]) -> Option<ConeId> {
        self.by_rays.get(rays).copied()
    }

    pub fn ray_index(&self, v: &RayVector) -> Option<usize> {
        self.rays.binary_search(v).ok()
    }

    /// Cone whose rays have these coordinates.
    pub fn find_by_vectors(&self, vectors: &[RayVector]) -> Option<ConeId> {
        let mut ids = Vec::with_capacity(vectors.len());
        for v in vectors {
            ids.push(self.ray_index(v)?);
        }
        ids.sort_unstable();
        self.find(&ids)
    }

    pub fn facets(&self, id: ConeId) -> &[ConeId] {
        &self.facets[id.0]
    }

    /// Cones having `id` as a facet.
    pub fn cofacets(&self, id: ConeId) -> &[ConeId] {
        &self.cofacets[id.0]
    }

    /// All faces of a cone including itself, in canonical order.
    pub fn faces(&self, id: ConeId) -> &[ConeId] {
        &self.faces[id.0]
    }

    pub fn is_face(&self, tau: ConeId, sigma: ConeId) -> bool {
        self.faces[sigma.0].binary_search(&tau).is_ok()
    }

    pub fn cones_of_dim(&self, d: usize) -> impl Iterator<Item = ConeId> + '_ {
        self.cones.iter().filter(move |c| c.dim == d).map(|c| c.id)
    }

    pub fn max_cone_dim(&self) -> usize {
        self.cones.iter().map(|c| c.dim).max().unwrap_or(0)
    }

    pub fn maximal_cones(&self) -> Vec<ConeId> {
        self.cones.iter().filter(|c| self.cofacets[c.id.0].is_empty()).map(|c| c.id).collect()
    }

    /// Faces of `sigma` of codimension two.
    pub fn codim2_faces(&self, sigma: ConeId) -> Vec<ConeId> {
        let d = self.cone(sigma).dim;
        if d < 2 {
            return Vec::new();
        }
        self.faces(sigma).iter().copied().filter(|t| self.cone(*t).dim == d - 2).collect()
    }

    /// `{tau in fan | sigma is a face of tau}`.
    pub fn star(&self, sigma: ConeId) -> Result<Vec<ConeId>> {
        if sigma.0 >= self.cones.len() {
            return Err(Error::ConeNotInFan(vec![sigma.0]));
        }
        Ok(self.cones.iter().filter(|t| self.is_face(sigma, t.id)).map(|t| t.id).collect())
    }

    pub fn is_simplicial(&self) -> bool {
        self.cones.iter().all(Cone::is_simplicial)
    }

    /// Restriction of functions from `sigma` to its face `tau`, cached.
    pub fn restriction(&self, sigma: ConeId, tau: ConeId) -> Arc<Restriction> {
        let key = (sigma, tau);
        if let Some(r) = self.restrictions.lock().expect("cache poisoned").get(&key) {
            return r.clone();
        }
        let r = Arc::new(
            self.cone(sigma)
                .ring
                .restriction_to(&self.cone(tau).ring)
                .expect("a face spans a subspace of the cone's span"),
        );
        self.restrictions.lock().expect("cache poisoned").insert(key, r.clone());
        r
    }

    /// Membership of a vector in a cone via its H-representation.
    pub fn cone_contains_vector(&self, id: ConeId, v: &[Q]) -> bool {
        let c = self.cone(id);
        c.equations.iter().all(|e| dense::dot(&dense::to_q(e), v).is_zero())
            && c.inequalities.iter().all(|h| dense::sign(&dense::dot(&dense::to_q(h), v)) >= 0)
    }

    /// Sum of the rays: a point of the relative interior.
    pub fn interior_point(&self, id: ConeId) -> Vec<Q> {
        let mut p = vec![Q::zero(); self.dim];
        for &r in &self.cone(id).rays {
            for (x, y) in p.iter_mut().zip(self.ray_vector(r)) {
                *x += y;
            }
        }
        p
    }

    /// Incidence sign of a facet. The cone is oriented by its chosen basis;
    /// the facet's basis followed by a ray of the cone outside the facet is
    /// compared against it.
    pub fn incidence_sign(&self, sigma: ConeId, tau: ConeId) -> Result<i32> {
        self.signs
            .get(&(sigma, tau))
            .copied()
            .ok_or_else(|| Error::Precondition(format!("cone {tau} is not a facet of cone {sigma}")))
    }

    /// Sign of a facet pair that is known to exist.
    pub fn sign(&self, sigma: ConeId, tau: ConeId) -> i32 {
        self.signs[&(sigma, tau)]
    }

    fn compute_sign(&self, sigma: ConeId, tau: ConeId) -> i32 {
        let s = self.cone(sigma);
        let t = self.cone(tau);
        let basis: Vec<Vec<Q>> = s.basis.iter().map(|&r| self.ray_vector(r)).collect();
        let extra = *s.rays.iter().find(|r| t.rays.binary_search(r).is_err()).expect("facet misses a ray");
        let mut columns: Vec<Vec<Q>> = t.basis.iter().map(|&r| self.ray_vector(r)).collect();
        columns.push(self.ray_vector(extra));
        let coords: Vec<Vec<Q>> = columns
            .iter()
            .map(|c| dense::solve(&basis, c).expect("facet lies in the span of the cone"))
            .collect();
        // coords are columns; the determinant of the transpose is the same
        let sign = dense::sign(&dense::det(&coords));
        debug_assert!(sign != 0);
        sign
    }

    /// True iff the support of the fan is the whole space: pure of full
    /// dimension, every codimension-one cone is a facet of exactly two
    /// maximal cones, and the maximal cones are connected through facets.
    pub fn is_complete(&self) -> bool {
        let n = self.dim;
        if n == 0 {
            return true;
        }
        let top: Vec<ConeId> = self.cones_of_dim(n).collect();
        if top.is_empty() || self.maximal_cones().iter().any(|c| self.cone(*c).dim != n) {
            return false;
        }
        for r in self.cones_of_dim(n - 1) {
            if self.cofacets(r).len() != 2 {
                return false;
            }
        }
        let index: HashMap<ConeId, usize> = top.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let mut seen = vec![false; top.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for f in self.facets(top[i]) {
                for nb in self.cofacets(*f) {
                    let j = index[nb];
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Fan of the listed cones (and their faces), with the map from the new
    /// ids to ids in `self`.
    pub fn subfan(&self, cones: &[ConeId]) -> Result<(Fan, Vec<ConeId>)> {
        let rays: Vec<Vec<i64>> = self.rays.iter().map(|r| r.coords().to_vec()).collect();
        let listed: Vec<Vec<usize>> = cones.iter().map(|c| self.cone(*c).rays.clone()).collect();
        let sub = Fan::new(self.dim, rays, listed)?;
        let map = sub
            .cones
            .iter()
            .map(|c| {
                let vs: Vec<RayVector> = c.rays.iter().map(|&r| sub.rays[r].clone()).collect();
                self.find_by_vectors(&vs).ok_or_else(|| Error::ConeNotInFan(c.rays.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((sub, map))
    }

    /// Identifies the cones of `sub` with cones of `self`; fails unless
    /// every cone of `sub` is a cone of `self`.
    pub fn embed_subfan(&self, sub: &Fan) -> Result<Vec<ConeId>> {
        if sub.dim != self.dim {
            return Err(Error::Precondition("subfan lives in a different space".into()));
        }
        sub.cones
            .iter()
            .map(|c| {
                let vs: Vec<RayVector> = c.rays.iter().map(|&r| sub.rays[r].clone()).collect();
                self.find_by_vectors(&vs).ok_or_else(|| Error::ConeNotInFan(c.rays.clone()))
            })
            .collect()
    }

    /// Image of `Star(sigma)` in `N / span(sigma)`, with the cone
    /// correspondence `Star(sigma) -> quotient`.
    pub fn quotient_fan(&self, sigma: ConeId) -> Result<QuotientFan> {
        let star = self.star(sigma)?;
        let s = self.cone(sigma);
        let d = s.dim;
        let projection: Vec<Vec<Q>> = s.equations.iter().map(|e| dense::to_q(e)).collect();
        let project = |v: &[Q]| -> Vec<Q> { projection.iter().map(|row| dense::dot(row, v)).collect() };
        let fail = |reason: String| Error::QuotientNotFan { cone: sigma.0, reason };

        // rays of the quotient come from the cones one dimension up
        let mut ray_of: BTreeMap<ConeId, Vec<i64>> = BTreeMap::new();
        for &t in &star {
            let c = self.cone(t);
            if c.dim != d + 1 {
                continue;
            }
            let r = *c.rays.iter().find(|r| s.rays.binary_search(r).is_err()).expect("cone above has a new ray");
            let image = dense::primitive_integer(&project(&self.ray_vector(r)));
            if image.iter().all(|&x| x == 0) {
                return Err(fail(format!("ray {r} projects to zero")));
            }
            ray_of.insert(t, image);
        }
        let mut images: Vec<Vec<i64>> = ray_of.values().cloned().collect();
        images.sort();
        let before = images.len();
        images.dedup();
        if images.len() != before {
            return Err(fail("two cones project onto the same ray".into()));
        }
        let ray_pos = |v: &Vec<i64>| images.binary_search(v).expect("image ray listed");
        let image_rays = |t: ConeId| -> Vec<usize> {
            let mut out: Vec<usize> = ray_of
                .iter()
                .filter(|(rho, _)| self.is_face(**rho, t))
                .map(|(_, v)| ray_pos(v))
                .collect();
            out.sort_unstable();
            out
        };
        let listed: Vec<Vec<usize>> =
            star.iter().filter(|t| self.cofacets(**t).is_empty()).map(|t| image_rays(*t)).collect();
        let quotient = Fan::new(self.dim - d, images.clone(), listed).map_err(|e| fail(e.to_string()))?;

        let mut correspondence = BTreeMap::new();
        let mut hit = BTreeSet::new();
        for &t in &star {
            let vs: Vec<RayVector> = image_rays(t).iter().map(|&i| RayVector(images[i].clone())).collect();
            let image = quotient.find_by_vectors(&vs).ok_or_else(|| fail(format!("cone {t} has no image cone")))?;
            if quotient.cone(image).dim + d != self.cone(t).dim || !hit.insert(image) {
                return Err(fail(format!("cone {t} is not mapped isomorphically")));
            }
            correspondence.insert(t, image);
        }
        if hit.len() != quotient.len() {
            return Err(fail("quotient has cones not coming from the star".into()));
        }
        Ok(QuotientFan { fan: quotient, correspondence })
    }

    /// The fan of the cone generated by all rays, if that cone is pointed.
    pub fn hull_fan(&self) -> Result<Fan> {
        let vectors: Vec<Vec<Q>> = self.rays.iter().map(RayVector::to_q).collect();
        let all: Vec<usize> = (0..vectors.len()).collect();
        let mut memo = HashMap::new();
        analyze_cone(&all, &vectors, self.dim, &mut memo)?;
        let closure = face_closure(&all, &memo);
        let extreme: Vec<Vec<i64>> = all
            .iter()
            .filter(|r| closure.contains(&vec![**r]))
            .map(|&r| self.rays[r].coords().to_vec())
            .collect();
        Fan::single_cone(self.dim, extreme)
    }

    /// Canonical text form: rays sorted, all nonzero cones sorted.
    pub fn to_text(&self) -> String {
        let mut out = format!("dim {}\n", self.dim);
        for (i, r) in self.rays.iter().enumerate() {
            let coords: Vec<String> = r.coords().iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("ray {i}: {}\n", coords.join(" ")));
        }
        for c in self.cones.iter().skip(1) {
            let ids: Vec<String> = c.rays.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("cone: {}  # id {}\n", ids.join(" "), c.id));
        }
        out
    }

    /// Face lattice flags for every ordered pair, as (is face, is facet).
    pub fn face_relation(&self, tau: ConeId, sigma: ConeId) -> (bool, bool) {
        (self.is_face(tau, sigma), self.facets(sigma).contains(&tau))
    }
}

/// A quotient fan together with the correspondence from the star.
#[derive(Clone, Debug)]
pub struct QuotientFan {
    pub fan: Fan,
    pub correspondence: BTreeMap<ConeId, ConeId>,
}

fn original_ids(c: &[usize], order: &[usize]) -> Vec<usize> {
    c.iter().map(|&i| order[i]).collect()
}

fn empty_face(dim: usize) -> FaceInfo {
    FaceInfo {
        dim: 0,
        equations: (0..dim).map(|i| (0..dim).map(|j| i64::from(i == j)).collect()).collect(),
        facets: Vec::new(),
    }
}

fn lex_first_basis(rays: &[usize], vectors: &[Vec<Q>]) -> Vec<usize> {
    let mut basis: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<Q>> = Vec::new();
    for &r in rays {
        rows.push(vectors[r].clone());
        if dense::rank(&rows) == rows.len() {
            basis.push(r);
        } else {
            rows.pop();
        }
    }
    basis
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Computes dimension, span equations and facets of the cone generated by
/// `rays`, recursively for all faces. Fails if the cone is not pointed.
fn analyze_cone(rays: &[usize], vectors: &[Vec<Q>], n: usize, memo: &mut HashMap<Vec<usize>, FaceInfo>) -> Result<()> {
    if memo.contains_key(rays) {
        return Ok(());
    }
    if rays.is_empty() {
        memo.insert(Vec::new(), empty_face(n));
        return Ok(());
    }
    let rows: Vec<Vec<Q>> = rays.iter().map(|&r| vectors[r].clone()).collect();
    let d = dense::rank(&rows);
    let equations: Vec<Vec<i64>> = dense::nullspace(&rows, n).iter().map(|v| dense::primitive_integer(v)).collect();

    let mut facets: BTreeMap<Vec<usize>, Vec<i64>> = BTreeMap::new();
    for subset in combinations(rays.len(), d - 1) {
        let sub: Vec<Vec<Q>> = subset.iter().map(|&i| rows[i].clone()).collect();
        if dense::rank(&sub) != d - 1 {
            continue;
        }
        let Some(h) = dense::nullspace(&sub, n).into_iter().find(|h| rows.iter().any(|r| !dense::dot(h, r).is_zero()))
        else {
            continue;
        };
        let signs: Vec<i32> = rows.iter().map(|r| dense::sign(&dense::dot(&h, r))).collect();
        let orient = if signs.iter().all(|&s| s >= 0) {
            1
        } else if signs.iter().all(|&s| s <= 0) {
            -1
        } else {
            continue;
        };
        let face: Vec<usize> = rays.iter().zip(&signs).filter(|(_, &s)| s == 0).map(|(&r, _)| r).collect();
        if facets.contains_key(&face) {
            continue;
        }
        let normal: Vec<Q> = h.iter().map(|x| x * Q::from_integer(orient.into())).collect();
        facets.insert(face, dense::primitive_integer(&normal));
    }

    // pointed iff span equations and facet normals together have full rank
    let mut all: Vec<Vec<Q>> = equations.iter().map(|e| dense::to_q(e)).collect();
    all.extend(facets.values().map(|h| dense::to_q(h)));
    if dense::rank(&all) != n {
        return Err(Error::NonConvexCone { rays: rays.to_vec() });
    }

    let info = FaceInfo { dim: d, equations, facets: facets.into_iter().collect() };
    let children: Vec<Vec<usize>> = info.facets.iter().map(|(f, _)| f.clone()).collect();
    memo.insert(rays.to_vec(), info);
    for f in children {
        analyze_cone(&f, vectors, n, memo)?;
    }
    Ok(())
}

fn face_closure(rays: &[usize], memo: &HashMap<Vec<usize>, FaceInfo>) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut stack = vec![rays.to_vec()];
    while let Some(c) = stack.pop() {
        if out.insert(c.clone()) {
            if let Some(info) = memo.get(&c) {
                stack.extend(info.facets.iter().map(|(f, _)| f.clone()));
            }
        }
    }
    out
}

fn is_face_rays(tau: &[usize], sigma: &[usize], memo: &HashMap<Vec<usize>, FaceInfo>) -> bool {
    tau.is_empty() || tau == sigma || face_closure(sigma, memo).contains(tau)
}

/// Checks that two cones meet in a common face.
fn intersects_properly(a: &[usize], b: &[usize], n: usize, memo: &HashMap<Vec<usize>, FaceInfo>) -> bool {
    let common: Vec<usize> = a.iter().filter(|r| b.contains(r)).copied().collect();
    if !is_face_rays(&common, a, memo) || !is_face_rays(&common, b, memo) {
        return false;
    }
    let (ia, ib) = (&memo[a], &memo[b]);
    let mut eqs: Vec<Vec<Q>> = ia.equations.iter().chain(&ib.equations).map(|e| dense::to_q(e)).collect();
    let ineqs: Vec<Vec<Q>> = ia.facets.iter().chain(&ib.facets).map(|(_, h)| dense::to_q(h)).collect();
    let common_info = if common.is_empty() { empty_face(n) } else { memo[&common].clone() };
    let inside_common = |x: &[Q]| {
        common_info.equations.iter().all(|e| dense::dot(&dense::to_q(e), x).is_zero())
            && common_info.facets.iter().all(|(_, h)| dense::sign(&dense::dot(&dense::to_q(h), x)) >= 0)
    };
    eqs.retain(|e| e.iter().any(|x| !x.is_zero()));
    for ray in extreme_rays(&eqs, &ineqs, n) {
        if !inside_common(&ray) {
            return false;
        }
    }
    true
}

/// Extreme rays of the pointed cone `{x : eqs.x = 0, ineqs.x >= 0}`.
pub(crate) fn extreme_rays(eqs: &[Vec<Q>], ineqs: &[Vec<Q>], n: usize) -> Vec<Vec<Q>> {
    if n == 0 {
        return Vec::new();
    }
    let rows: Vec<&Vec<Q>> = eqs.iter().chain(ineqs).collect();
    let feasible = |x: &[Q]| {
        eqs.iter().all(|e| dense::dot(e, x).is_zero()) && ineqs.iter().all(|h| dense::sign(&dense::dot(h, x)) >= 0)
    };
    let mut out: Vec<Vec<Q>> = Vec::new();
    let push = |x: Vec<Q>, out: &mut Vec<Vec<Q>>| {
        let p = dense::to_q(&dense::primitive_integer(&x));
        if !out.contains(&p) {
            out.push(p);
        }
    };
    if n == 1 {
        for x in [vec![Q::from_integer(1.into())], vec![Q::from_integer((-1).into())]] {
            if feasible(&x) {
                push(x, &mut out);
            }
        }
        return out;
    }
    for subset in combinations(rows.len(), n - 1) {
        let sub: Vec<Vec<Q>> = subset.iter().map(|&i| rows[i].clone()).collect();
        if dense::rank(&sub) != n - 1 {
            continue;
        }
        let null = dense::nullspace(&sub, n);
        let x = &null[0];
        let neg: Vec<Q> = x.iter().map(|v| -v).collect();
        if feasible(x) {
            push(x.clone(), &mut out);
        }
        if feasible(&neg) {
            push(neg, &mut out);
        }
    }
    out
}

/// A map of fans: every source cone lies in some target cone.
#[derive(Clone, Debug)]
pub struct FanMap {
    pub source: Arc<Fan>,
    pub target: Arc<Fan>,
    /// Smallest target cone containing each source cone.
    pub assignment: Vec<ConeId>,
    pub proper: bool,
}

impl FanMap {
    /// Source cones of the same dimension as `sigma` contained in it.
    pub fn preimage_cones(&self, sigma: ConeId) -> Vec<ConeId> {
        let d = self.target.cone(sigma).dim;
        self.source
            .cones()
            .iter()
            .filter(|c| c.dim == d && self.assignment[c.id.0] == sigma)
            .map(|c| c.id)
            .collect()
    }

    pub fn is_identity_like(&self) -> bool {
        self.source.len() == self.target.len()
            && self.source.cones().iter().all(|c| self.target.cone(self.assignment[c.id.0]).dim == c.dim)
    }
}

/// Builds the map `source -> target`, inferring the assignment.
pub fn subdivision_map(source: Arc<Fan>, target: Arc<Fan>) -> Result<FanMap> {
    if source.dim() != target.dim() {
        return Err(Error::Precondition("fans live in spaces of different dimension".into()));
    }
    let mut assignment = Vec::with_capacity(source.len());
    for c in source.cones() {
        let vectors: Vec<Vec<Q>> = c.rays.iter().map(|&r| source.ray_vector(r)).collect();
        let containing: Vec<ConeId> = target
            .cones()
            .iter()
            .filter(|t| vectors.iter().all(|v| target.cone_contains_vector(t.id, v)))
            .map(|t| t.id)
            .collect();
        let smallest = containing
            .iter()
            .copied()
            .min_by_key(|t| (target.cone(*t).dim, *t))
            .ok_or(Error::NotContained { source_cone: c.id.0 })?;
        debug_assert!(containing.iter().all(|t| target.is_face(smallest, *t)));
        assignment.push(smallest);
    }
    let proper = covers_target(&source, &target, &assignment);
    Ok(FanMap { source, target, assignment, proper })
}

/// Same as [`subdivision_map`], checking an explicit assignment against the
/// inferred one.
pub fn subdivision_map_with(source: Arc<Fan>, target: Arc<Fan>, explicit: &[(ConeId, ConeId)]) -> Result<FanMap> {
    let map = subdivision_map(source, target)?;
    for (s, t) in explicit {
        if s.0 >= map.source.len() || t.0 >= map.target.len() {
            return Err(Error::Precondition(format!("map entry {s} -> {t} refers to an unknown cone")));
        }
        if map.assignment[s.0] != *t {
            return Err(Error::Precondition(format!(
                "map entry {s} -> {t} disagrees with the smallest containing cone {}",
                map.assignment[s.0]
            )));
        }
    }
    Ok(map)
}

/// Every maximal target cone is covered by the source cones of its own
/// dimension inside it: facets interior to the target cone are shared by
/// exactly two such cones, facets on its boundary by one.
fn covers_target(source: &Fan, target: &Fan, assignment: &[ConeId]) -> bool {
    for tau in target.maximal_cones() {
        let t = target.cone(tau);
        let pre: Vec<ConeId> = source
            .cones()
            .iter()
            .filter(|c| c.dim == t.dim && target.is_face(assignment[c.id.0], tau))
            .map(|c| c.id)
            .collect();
        if pre.is_empty() {
            return false;
        }
        let mut count: BTreeMap<ConeId, usize> = BTreeMap::new();
        for &p in &pre {
            for &f in source.facets(p) {
                *count.entry(f).or_default() += 1;
            }
        }
        for (f, k) in count {
            let on_boundary = target.is_face(assignment[f.0], tau) && assignment[f.0] != tau;
            let expected = if on_boundary { 1 } else { 2 };
            if k != expected {
                return false;
            }
        }
    }
    true
}
